#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "htp/alignment.hpp"
#include "htp/case_model.hpp"

namespace htp {

/// Writes `content` to a sibling temp file and renames it over `path`.
/// Throws AlreadyExists when `path` exists and `overwrite` is false.
void write_file_atomic(const std::filesystem::path& path, std::string_view content, bool overwrite = false);
std::string read_file(const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);

/// Exclusive per-case lock held as `<dir>/.lock`; released on destruction.
class CaseLock {
public:
    explicit CaseLock(std::filesystem::path dir);
    ~CaseLock();
    CaseLock(const CaseLock&) = delete;
    CaseLock& operator=(const CaseLock&) = delete;

private:
    std::filesystem::path file_;
};

/// case.json layout; the image is referenced by file name and digest.
Json case_json(const CaseRecord& record);

/// Plain directory store: `<root>/cases/<case-id>/case.json` plus the image.
class CaseStore {
public:
    /// Creates `<root>/cases` when missing and indexes what is on disk.
    explicit CaseStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path case_dir(const std::string& case_id) const;

    /// Throws DuplicateId when the case is already stored.
    std::filesystem::path store_case(const CaseRecord& record);
    /// Throws NotFound, or DigestMismatch when the image bytes changed on disk.
    CaseRecord load_case(const std::string& case_id) const;
    bool contains(const std::string& case_id) const { return index_.contains(case_id); }
    /// Stored case ids in ascending order.
    std::vector<std::string> ids() const;
    const std::map<std::string, std::filesystem::path>& index() const noexcept { return index_; }
    /// Rescans `<root>/cases`; directories without case.json are ignored.
    void rebuild_index();

private:
    std::filesystem::path root_;
    std::map<std::string, std::filesystem::path> index_;
};

enum class TableFormat { Csv, Json };

TableFormat table_format_from_string(std::string_view name);

inline constexpr std::string_view kStatsCsvHeader = "group,cases,mean,median,q1,q3,min,max,sd";

/// Group rows by descending mean (ties by name), OVERALL last.
std::vector<StatsRow> export_order(std::span<const StatsRow> rows);
/// Reals at 4 decimal digits in both formats.
std::string format_table(std::span<const StatsRow> rows, TableFormat format);
/// Throws EmptyInput for no rows and AlreadyExists unless `overwrite`.
void export_table(std::span<const StatsRow> rows, TableFormat format, const std::filesystem::path& path,
                  bool overwrite = false);

}  // namespace htp
