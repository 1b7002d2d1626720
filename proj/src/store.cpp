#include "htp/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace htp {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content, bool overwrite) {
    if (!overwrite && fs::exists(path)) {
        throw Error(ErrorKind::AlreadyExists, path.string() + " exists (use --force to overwrite)");
    }
    static std::atomic<unsigned> counter{0};
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp-" +
                                               std::to_string(::getpid()) + "-" + std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw Error(ErrorKind::Io, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Json read_json_file(const fs::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Io, path.string() + " is not valid JSON: " + e.what());
    }
}

// --- CaseLock -------------------------------------------------------------------

CaseLock::CaseLock(fs::path dir) : file_(std::move(dir) / ".lock") {
    const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) throw Error(ErrorKind::AlreadyExists, file_.parent_path().string() + " is locked");
        throw Error(ErrorKind::Io, "cannot lock " + file_.string() + ": " + std::strerror(errno));
    }
    const auto pid = std::to_string(::getpid());
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

CaseLock::~CaseLock() {
    std::error_code ec;
    fs::remove(file_, ec);
}

// --- CaseStore ------------------------------------------------------------------

namespace {

std::string image_file_name(const DrawingArtifact& image) {
    return "image" + std::string(file_extension(image.media_type()));
}

}  // namespace

Json case_json(const CaseRecord& r) {
    Json j{{"id", r.id.raw()},
           {"image",
            {{"file", image_file_name(r.image)},
             {"media_type", std::string(to_string(r.image.media_type()))},
             {"sha256", r.image.sha256()}}},
           {"subject_note", r.subject_note},
           {"stage_outputs", r.stage_outputs}};
    if (r.expert_label) j["expert_label"] = *r.expert_label;
    if (r.expert_text) j["expert_text"] = *r.expert_text;
    return j;
}

CaseStore::CaseStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_ / "cases", ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create store at " + root_.string() + ": " + ec.message());
    rebuild_index();
}

fs::path CaseStore::case_dir(const std::string& case_id) const { return root_ / "cases" / case_id; }

void CaseStore::rebuild_index() {
    index_.clear();
    for (const auto& entry : fs::directory_iterator(root_ / "cases")) {
        if (!entry.is_directory() || !fs::is_regular_file(entry.path() / "case.json")) continue;
        index_.emplace(entry.path().filename().string(), entry.path());
    }
}

std::vector<std::string> CaseStore::ids() const {
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const auto& [id, dir] : index_) out.push_back(id);
    return out;
}

fs::path CaseStore::store_case(const CaseRecord& record) {
    const auto& id = record.id.raw();
    const auto dir = case_dir(id);
    if (index_.contains(id) || fs::exists(dir / "case.json")) {
        throw Error(ErrorKind::DuplicateId, "case " + id + " is already stored");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    CaseLock lock(dir);
    if (fs::exists(dir / "case.json")) throw Error(ErrorKind::DuplicateId, "case " + id + " is already stored");
    const auto& bytes = record.image.bytes();
    write_file_atomic(dir / image_file_name(record.image),
                      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), true);
    // case.json is written last; its presence marks a complete case.
    write_file_atomic(dir / "case.json", canonical_dump(case_json(record), true) + "\n");
    index_.emplace(id, dir);
    return dir;
}

CaseRecord CaseStore::load_case(const std::string& case_id) const {
    const auto it = index_.find(case_id);
    const auto dir = it != index_.end() ? it->second : case_dir(case_id);
    if (!fs::is_regular_file(dir / "case.json")) throw Error(ErrorKind::NotFound, "case " + case_id + " not found");
    const auto j = read_json_file(dir / "case.json");
    try {
        const auto& image = j.at("image");
        const auto raw = read_file(dir / image.at("file").get<std::string>());
        auto artifact = DrawingArtifact::verified(std::vector<std::uint8_t>(raw.begin(), raw.end()),
                                                  media_type_from_string(image.at("media_type").get<std::string>()),
                                                  image.at("sha256").get<std::string>());
        CaseRecord r{parse_case_id(j.at("id").get<std::string>()), std::move(artifact),
                     j.value("subject_note", ""), std::nullopt, std::nullopt,
                     j.value("stage_outputs", std::map<std::string, std::string>{})};
        if (j.contains("expert_label")) r.expert_label = j.at("expert_label").get<std::string>();
        if (j.contains("expert_text")) r.expert_text = j.at("expert_text").get<std::string>();
        if (r.id.raw() != case_id) {
            throw Error(ErrorKind::Io, "case.json in " + dir.string() + " names case " + r.id.raw());
        }
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Io, "malformed case.json for " + case_id + ": " + e.what());
    }
}

// --- export ----------------------------------------------------------------------

TableFormat table_format_from_string(std::string_view name) {
    if (name == "csv") return TableFormat::Csv;
    if (name == "json") return TableFormat::Json;
    throw Error(ErrorKind::InvalidArgument, "unknown table format '" + std::string(name) + "'");
}

std::vector<StatsRow> export_order(std::span<const StatsRow> rows) {
    std::vector<StatsRow> groups, overall;
    for (const auto& r : rows) (r.group == kOverallGroup ? overall : groups).push_back(r);
    std::stable_sort(groups.begin(), groups.end(), [](const StatsRow& a, const StatsRow& b) {
        if (a.mean != b.mean) return a.mean > b.mean;
        return a.group < b.group;
    });
    groups.insert(groups.end(), overall.begin(), overall.end());
    return groups;
}

namespace {

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed4(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", round_to(value, 4) + 0.0);
    return buf;
}

}  // namespace

std::string format_table(std::span<const StatsRow> rows, TableFormat format) {
    if (rows.empty()) throw Error(ErrorKind::EmptyInput, "no statistics rows to export");
    const auto ordered = export_order(rows);
    if (format == TableFormat::Json) {
        Json list = Json::array();
        for (const auto& r : ordered) {
            auto j = to_json(r);
            for (const char* key : {"mean", "median", "q1", "q3", "min", "max", "sd"}) {
                j[key] = round_to(j[key].get<double>(), 4);
            }
            list.push_back(std::move(j));
        }
        return canonical_dump(list, true) + "\n";
    }
    std::string out(kStatsCsvHeader);
    out += '\n';
    for (const auto& r : ordered) {
        out += csv_field(r.group) + ',' + std::to_string(r.cases);
        for (double v : {r.mean, r.median, r.q1, r.q3, r.min, r.max, r.sd}) out += ',' + fixed4(v);
        out += '\n';
    }
    return out;
}

void export_table(std::span<const StatsRow> rows, TableFormat format, const fs::path& path, bool overwrite) {
    write_file_atomic(path, format_table(rows, format), overwrite);
}

}  // namespace htp
