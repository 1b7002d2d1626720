#include "htp/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "htp/error.hpp"

namespace htp {

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars) const {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) break;
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        const std::string name = text.substr(open + 2, close - open - 2);
        const auto it = vars.find(name);
        if (it == vars.end()) {
            throw Error(ErrorKind::PromptTemplate, "prompt " + id + ": no value for placeholder {{" + name + "}}");
        }
        out.append(text, pos, open - pos);
        out += it->second;
        pos = close + 2;
    }
    out.append(text, pos, std::string::npos);
    return out;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    for (auto open = text.find("{{"); open != std::string::npos; open = text.find("{{", open + 2)) {
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        auto name = text.substr(open + 2, close - open - 2);
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
        open = close;
    }
    return names;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorKind::Config, "prompt directory " + dir.string() + " does not exist");
    }
    PromptLibrary library;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        std::ostringstream text;
        text << in.rdbuf();
        library.add(PromptTemplate{entry.path().stem().string(), text.str()});
    }
    return library;
}

void PromptLibrary::add(PromptTemplate prompt) {
    const auto id = prompt.id;
    prompts_.insert_or_assign(id, std::move(prompt));
}

const PromptTemplate& PromptLibrary::get(const std::string& id) const {
    const auto it = prompts_.find(id);
    if (it == prompts_.end()) throw Error(ErrorKind::PromptTemplate, "unknown prompt template '" + id + "'");
    return it->second;
}

}  // namespace htp
