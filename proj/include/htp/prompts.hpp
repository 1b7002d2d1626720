#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace htp {

/// A versioned prompt; `id` is recorded in every output produced with it.
struct PromptTemplate {
    std::string id;
    std::string text;

    /// Replaces each `{{name}}` with vars[name] in one pass (substituted text is
    /// not rescanned). Throws PromptTemplate for a placeholder without a value.
    std::string render(const std::map<std::string, std::string>& vars) const;

    /// Placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;
};

/// Prompt templates loaded from `<dir>/<prompt_id>.txt`.
class PromptLibrary {
public:
    PromptLibrary() = default;
    static PromptLibrary load(const std::filesystem::path& dir);

    void add(PromptTemplate prompt);
    const PromptTemplate& get(const std::string& id) const;
    bool contains(const std::string& id) const { return prompts_.contains(id); }

private:
    std::map<std::string, PromptTemplate> prompts_;
};

}  // namespace htp
