#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "htp/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>

#include "htp/batch.hpp"

namespace htp {
namespace {

constexpr std::string_view kImagePlaceholders[] = {"{{image_base64}}", "{{image_data_url}}", "{{media_type}}"};

Json default_template(BackendKind kind) {
    if (kind == BackendKind::Embed) {
        return Json{{"model", "{{model_id}}"}, {"input", "{{text}}"}};
    }
    Json content = Json::array();
    content.push_back(Json{{"type", "text"}, {"text", "{{prompt}}"}});
    content.push_back(Json{{"type", "image_url"}, {"image_url", Json{{"url", "{{image_data_url}}"}}}});
    Json messages = Json::array();
    messages.push_back(Json{{"role", "user"}, {"content", content}});
    return Json{{"model", "{{model_id}}"}, {"messages", messages}};
}

std::string default_pointer(BackendKind kind) {
    return kind == BackendKind::Embed ? "/data/0/embedding" : "/choices/0/message/content";
}

bool mentions_image(const std::string& s) {
    for (auto p : kImagePlaceholders) {
        if (s.find(p) != std::string::npos) return true;
    }
    return false;
}

std::string substitute(std::string text, const std::map<std::string, std::string>& vars) {
    for (const auto& [key, value] : vars) {
        const std::string token = "{{" + key + "}}";
        for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
            text.replace(pos, token.size(), value);
        }
    }
    return text;
}

// Without an image, every string that references one is removed, and so is
// each enclosing object (an image part is meaningless without its payload).
// Arrays drop removed elements; at the root only the offending keys go.
std::optional<Json> render(const Json& node, const std::map<std::string, std::string>& vars, bool has_image,
                           bool root) {
    if (node.is_string()) {
        const auto& s = node.get_ref<const std::string&>();
        if (!has_image && mentions_image(s)) return std::nullopt;
        return Json(substitute(s, vars));
    }
    if (node.is_array()) {
        Json out = Json::array();
        for (const auto& child : node) {
            if (auto r = render(child, vars, has_image, false)) out.push_back(std::move(*r));
        }
        return out;
    }
    if (node.is_object()) {
        Json out = Json::object();
        for (const auto& [key, child] : node.items()) {
            auto r = render(child, vars, has_image, false);
            if (!r) {
                if (!root) return std::nullopt;
                continue;
            }
            out[key] = std::move(*r);
        }
        return out;
    }
    return node;
}

struct ParsedUrl {
    std::string origin;
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

thread_local std::mt19937_64 jitter_rng{std::random_device{}()};

}  // namespace

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Generate ? "generate" : "embed"; }

void BackendSpec::validate() const {
    if (name.empty()) throw Error(ErrorKind::Config, "backend name is empty");
    if (timeout.count() <= 0) throw Error(ErrorKind::Config, "backend " + name + ": timeout must be > 0 ms");
    if (max_retries < 0 || max_retries > 5) {
        throw Error(ErrorKind::Config, "backend " + name + ": max_retries must be in [0, 5]");
    }
    if (!mock_script && endpoint.empty()) throw Error(ErrorKind::Config, "backend " + name + ": endpoint is empty");
    if (expected_dim && *expected_dim == 0) throw Error(ErrorKind::Config, "backend " + name + ": expected_dim is 0");
}

BackendSpec backend_spec_from_json(const Json& j) {
    BackendSpec spec;
    try {
        spec.name = j.at("name").get<std::string>();
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "generate") {
            spec.kind = BackendKind::Generate;
        } else if (kind == "embed") {
            spec.kind = BackendKind::Embed;
        } else {
            throw Error(ErrorKind::Config, "backend " + spec.name + ": unknown kind '" + kind + "'");
        }
        spec.endpoint = j.value("endpoint", "");
        spec.model_id = j.value("model_id", "");
        spec.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000LL));
        spec.max_retries = j.value("max_retries", 2);
        spec.api_key_env = j.value("api_key_env", "");
        if (j.contains("expected_dim")) spec.expected_dim = j.at("expected_dim").get<std::size_t>();
        if (j.contains("request_template")) spec.request_template = j.at("request_template");
        spec.response_pointer = j.value("response_pointer", "");
        if (j.contains("mock_script")) spec.mock_script = j.at("mock_script").get<std::string>();
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Config, std::string("backend entry: ") + e.what());
    }
    spec.validate();
    return spec;
}

Json to_json(const BackendSpec& spec) {
    Json j{{"name", spec.name},
           {"kind", std::string(to_string(spec.kind))},
           {"endpoint", spec.endpoint},
           {"model_id", spec.model_id},
           {"timeout_ms", spec.timeout.count()},
           {"max_retries", spec.max_retries},
           {"api_key_env", spec.api_key_env}};
    if (spec.expected_dim) j["expected_dim"] = *spec.expected_dim;
    if (!spec.request_template.is_null()) j["request_template"] = spec.request_template;
    if (!spec.response_pointer.empty()) j["response_pointer"] = spec.response_pointer;
    if (spec.mock_script) j["mock_script"] = *spec.mock_script;
    return j;
}

GenerateRequest GenerateRequest::make(std::optional<DrawingArtifact> image, std::string prompt,
                                      std::string prompt_id) {
    if (trim(prompt).empty()) throw Error(ErrorKind::EmptyText, "prompt '" + prompt_id + "' rendered empty");
    return GenerateRequest{std::move(image), std::move(prompt), std::move(prompt_id)};
}

Json request_envelope(const GenerateRequest& request) {
    Json image = nullptr;
    if (request.image) {
        image = Json{{"media_type", std::string(to_string(request.image->media_type()))},
                     {"sha256", request.image->sha256()}};
    }
    return Json{{"kind", "generate"}, {"image", image}, {"prompt", request.prompt}, {"prompt_id", request.prompt_id}};
}

std::string fingerprint(const GenerateRequest& request) { return sha256_hex(canonical_dump(request_envelope(request))); }

std::string embed_fingerprint(std::string_view text) {
    return sha256_hex(canonical_dump(Json{{"kind", "embed"}, {"text", std::string(text)}}));
}

EmbeddingVector EmbeddingVector::make(std::vector<double> values, std::string source) {
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, "embedding from " + source + " is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::NonFinite, "embedding from " + source + " has a non-finite entry at index " +
                                                  std::to_string(i));
        }
    }
    return EmbeddingVector{std::move(values), std::move(source)};
}

GenerationResult generate_interpretation(const Backend& backend, const GenerateRequest& request) {
    if (!backend.supports(BackendKind::Generate)) {
        throw Error(ErrorKind::WrongBackendKind, "backend " + backend.name() + " cannot generate");
    }
    auto attempted = backend.complete(request);
    if (trim(attempted.value).empty()) {
        throw Error(ErrorKind::EmptyResponse, "backend " + backend.name() + " returned an empty response",
                    attempted.retry_count + 1);
    }
    return GenerationResult{InterpretationText::make(std::move(attempted.value), backend.name(), request.prompt_id),
                            attempted.retry_count};
}

EmbeddingVector embed_text(const Backend& backend, std::string_view text) {
    if (!backend.supports(BackendKind::Embed)) {
        throw Error(ErrorKind::WrongBackendKind, "backend " + backend.name() + " cannot embed");
    }
    if (trim(text).empty()) throw Error(ErrorKind::EmptyText, "cannot embed empty text");
    auto attempted = backend.embed(text);
    if (const auto dim = backend.expected_dim(); dim && attempted.value.size() != *dim) {
        throw Error(ErrorKind::DimensionMismatch, "backend " + backend.name() + " declares dim " + std::to_string(*dim) +
                                                      " but returned " + std::to_string(attempted.value.size()));
    }
    return EmbeddingVector::make(std::move(attempted.value), backend.name());
}

std::vector<Outcome<GenerationResult>> run_batch(const Backend& backend, std::span<const GenerateRequest> requests,
                                                 int parallelism) {
    return parallel_map(requests, parallelism,
                        [&backend](const GenerateRequest& r) { return generate_interpretation(backend, r); });
}

std::vector<Outcome<EmbeddingVector>> run_embed_batch(const Backend& backend, std::span<const std::string> texts,
                                                      int parallelism) {
    return parallel_map(texts, parallelism, [&backend](const std::string& t) { return embed_text(backend, t); });
}

// --- ScriptedMock -----------------------------------------------------------

ScriptedMock::ScriptedMock(std::string name, MockFallback fallback) : name_(std::move(name)), fallback_(fallback) {}

std::unique_ptr<ScriptedMock> ScriptedMock::load(std::string name, const std::string& path, MockFallback fallback) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read mock script " + path);
    Json script;
    try {
        script = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Config, "mock script " + path + ": " + e.what());
    }
    return from_json(std::move(name), script, fallback);
}

std::unique_ptr<ScriptedMock> ScriptedMock::from_json(std::string name, const Json& script, MockFallback fallback) {
    if (!script.is_array()) throw Error(ErrorKind::Config, "mock script must be a JSON array");
    auto mock = std::make_unique<ScriptedMock>(std::move(name), fallback);
    for (const auto& entry : script) {
        if (!entry.is_object() || !entry.contains("fingerprint")) {
            throw Error(ErrorKind::Config, "mock script entry without fingerprint");
        }
        const auto fp = entry.at("fingerprint").get<std::string>();
        if (entry.contains("response_text")) {
            mock->script(fp, entry.at("response_text").get<std::string>());
        } else if (entry.contains("response_vector")) {
            mock->script(fp, entry.at("response_vector").get<std::vector<double>>());
        } else {
            throw Error(ErrorKind::Config, "mock script entry " + fp + " has no response");
        }
    }
    return mock;
}

void ScriptedMock::script(const std::string& fingerprint, Response response) {
    std::unique_lock lock(mutex_);
    script_[fingerprint] = std::move(response);
}

void ScriptedMock::on_generate(const GenerateRequest& request, std::string text) {
    script(fingerprint(request), std::move(text));
}

void ScriptedMock::on_embed(std::string_view text, std::vector<double> vector) {
    script(embed_fingerprint(text), std::move(vector));
}

void ScriptedMock::set_delay_hook(std::function<void(const std::string&)> hook) {
    std::unique_lock lock(mutex_);
    delay_hook_ = std::move(hook);
}

Json ScriptedMock::to_script_json() const {
    std::shared_lock lock(mutex_);
    Json out = Json::array();
    for (const auto& [fp, response] : script_) {
        Json entry{{"fingerprint", fp}};
        if (const auto* text = std::get_if<std::string>(&response)) {
            entry["response_text"] = *text;
        } else {
            entry["response_vector"] = std::get<std::vector<double>>(response);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::optional<ScriptedMock::Response> ScriptedMock::lookup(const std::string& fingerprint) const {
    std::function<void(const std::string&)> hook;
    std::optional<Response> found;
    {
        std::shared_lock lock(mutex_);
        hook = delay_hook_;
        if (auto it = script_.find(fingerprint); it != script_.end()) found = it->second;
    }
    ++calls_;
    if (hook) hook(fingerprint);
    return found;
}

Attempted<std::string> ScriptedMock::complete(const GenerateRequest& request) const {
    const auto fp = fingerprint(request);
    if (auto found = lookup(fp)) {
        if (const auto* text = std::get_if<std::string>(&*found)) return {*text, 0};
        throw Error(ErrorKind::BadResponse, "mock " + name_ + ": fingerprint " + fp + " holds a vector, not text", 1);
    }
    if (fallback_ == MockFallback::EchoHash) return {"echo:" + fp, 0};
    throw Error(ErrorKind::Unscripted,
                "mock " + name_ + ": unscripted request " + fp + " (prompt_id " + request.prompt_id + ")", 1);
}

Attempted<std::vector<double>> ScriptedMock::embed(std::string_view text) const {
    const auto fp = embed_fingerprint(text);
    if (auto found = lookup(fp)) {
        if (const auto* vec = std::get_if<std::vector<double>>(&*found)) return {*vec, 0};
        throw Error(ErrorKind::BadResponse, "mock " + name_ + ": fingerprint " + fp + " holds text, not a vector", 1);
    }
    if (fallback_ == MockFallback::EchoHash) return {echo_hash_vector(fp), 0};
    throw Error(ErrorKind::Unscripted, "mock " + name_ + ": unscripted embedding request " + fp, 1);
}

std::vector<double> echo_hash_vector(const std::string& fingerprint) {
    std::vector<double> out;
    out.reserve(fingerprint.size() / 2);
    for (std::size_t i = 0; i + 1 < fingerprint.size(); i += 2) {
        const int byte = std::stoi(fingerprint.substr(i, 2), nullptr, 16);
        out.push_back((byte + 1) / 256.0);
    }
    return out;
}

// --- HTTP -------------------------------------------------------------------

HttpResponse HttplibTransport::post(const std::string& url, const std::map<std::string, std::string>& headers,
                                    const std::string& body, std::chrono::milliseconds timeout) const {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path, hdrs, body, "application/json");
    if (!result) {
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (result.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout) {
            throw Error(ErrorKind::Timeout, "request to " + origin + " timed out");
        }
        throw Error(ErrorKind::Transport, "request to " + origin + " failed: " + httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
}

std::chrono::milliseconds RetryPolicy::ceiling(int retry) const {
    const double ms = static_cast<double>(base.count()) * std::pow(factor, retry);
    return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(cap.count()))));
}

std::chrono::milliseconds RetryPolicy::delay(int retry) const {
    std::uniform_int_distribution<long long> dist(0, ceiling(retry).count());
    return std::chrono::milliseconds(dist(jitter_rng));
}

HttpBackend::HttpBackend(BackendSpec spec, std::shared_ptr<const Transport> transport, RetryPolicy policy)
    : spec_(std::move(spec)), transport_(std::move(transport)), policy_(std::move(policy)) {
    spec_.validate();
    if (spec_.request_template.is_null()) spec_.request_template = default_template(spec_.kind);
    if (spec_.response_pointer.empty()) spec_.response_pointer = default_pointer(spec_.kind);
    if (!policy_.sleep) policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::optional<std::size_t> HttpBackend::expected_dim() const {
    if (spec_.kind != BackendKind::Embed) return std::nullopt;
    return spec_.expected_dim.value_or(kDefaultRemoteEmbeddingDim);
}

Json HttpBackend::render_body(const std::map<std::string, std::string>& vars, bool has_image) const {
    return render(spec_.request_template, vars, has_image, true).value_or(Json::object());
}

Attempted<Json> HttpBackend::post_with_retries(const Json& body) const {
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (!spec_.api_key_env.empty()) {
        const char* key = std::getenv(spec_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorKind::Config, "backend " + spec_.name + ": environment variable " + spec_.api_key_env +
                                               " is not set");
        }
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    const std::string payload = body.dump();

    const int max_attempts = 1 + spec_.max_retries;
    for (int attempt = 1;; ++attempt) {
        try {
            const auto response = transport_->post(spec_.endpoint, headers, payload, spec_.timeout);
            const bool retryable_status = response.status == 429 || response.status >= 500;
            if (retryable_status) {
                throw Error(ErrorKind::Transport, "backend " + spec_.name + ": HTTP " + std::to_string(response.status));
            }
            if (response.status < 200 || response.status >= 300) {
                throw Error(ErrorKind::BadResponse,
                            "backend " + spec_.name + ": HTTP " + std::to_string(response.status), attempt);
            }
            try {
                return {Json::parse(response.body), attempt - 1};
            } catch (const Json::exception& e) {
                // NaN / Infinity literals (as emitted by some servers) and
                // overflowing exponents are not valid JSON numbers.
                static const std::regex kNonFinite(R"((\bNaN\b|\bInfinity\b|[0-9][eE]\+?[0-9]{3,}))");
                if (std::regex_search(response.body, kNonFinite)) {
                    throw Error(ErrorKind::NonFinite, "backend " + spec_.name + ": response holds a non-finite number",
                                attempt);
                }
                throw Error(ErrorKind::BadResponse, "backend " + spec_.name + ": response is not JSON: " + e.what(),
                            attempt);
            }
        } catch (const Error& e) {
            const bool retryable = e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::Timeout;
            if (!retryable) throw;
            if (attempt >= max_attempts) {
                throw Error(e.kind(), std::string(e.what()) + " after " + std::to_string(attempt) + " attempt(s)",
                            attempt);
            }
            policy_.sleep(policy_.delay(attempt - 1));
        }
    }
}

Attempted<std::string> HttpBackend::complete(const GenerateRequest& request) const {
    std::map<std::string, std::string> vars{{"model_id", spec_.model_id}, {"prompt", request.prompt}};
    if (request.image) {
        const auto media = std::string(request.image->media_type() == MediaType::Png ? "image/png" : "image/jpeg");
        const auto b64 = base64_encode(request.image->bytes());
        vars["media_type"] = media;
        vars["image_base64"] = b64;
        vars["image_data_url"] = "data:" + media + ";base64," + b64;
    }
    auto [json, retries] = post_with_retries(render_body(vars, request.image.has_value()));
    const Json::json_pointer ptr(spec_.response_pointer);
    if (!json.contains(ptr) || !json.at(ptr).is_string()) {
        throw Error(ErrorKind::EmptyResponse, "backend " + spec_.name + ": no text at " + spec_.response_pointer,
                    retries + 1);
    }
    return {json.at(ptr).get<std::string>(), retries};
}

Attempted<std::vector<double>> HttpBackend::embed(std::string_view text) const {
    auto [json, retries] = post_with_retries(render_body({{"model_id", spec_.model_id}, {"text", std::string(text)}}, false));
    const Json::json_pointer ptr(spec_.response_pointer);
    if (!json.contains(ptr) || !json.at(ptr).is_array()) {
        throw Error(ErrorKind::BadResponse, "backend " + spec_.name + ": no vector at " + spec_.response_pointer,
                    retries + 1);
    }
    std::vector<double> values;
    for (const auto& v : json.at(ptr)) {
        if (!v.is_number()) {
            throw Error(ErrorKind::NonFinite, "backend " + spec_.name + ": non-numeric embedding entry", retries + 1);
        }
        values.push_back(v.get<double>());
    }
    return {std::move(values), retries};
}

std::shared_ptr<const Backend> make_backend(const BackendSpec& spec, std::shared_ptr<const Transport> transport) {
    if (spec.mock_script) return ScriptedMock::load(spec.name, *spec.mock_script);
    if (!transport) transport = std::make_shared<HttplibTransport>();
    return std::make_shared<HttpBackend>(spec, std::move(transport));
}

// --- RecordingBackend ---------------------------------------------------------

Attempted<std::string> RecordingBackend::complete(const GenerateRequest& request) const {
    auto result = inner_->complete(request);
    std::lock_guard lock(mutex_);
    captured_[fingerprint(request)] = result.value;
    return result;
}

Attempted<std::vector<double>> RecordingBackend::embed(std::string_view text) const {
    auto result = inner_->embed(text);
    std::lock_guard lock(mutex_);
    captured_[embed_fingerprint(text)] = result.value;
    return result;
}

Json RecordingBackend::script_json() const {
    ScriptedMock snapshot(inner_->name());
    {
        std::lock_guard lock(mutex_);
        for (const auto& [fp, response] : captured_) snapshot.script(fp, response);
    }
    return snapshot.to_script_json();
}

}  // namespace htp
