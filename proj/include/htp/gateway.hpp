#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "htp/canonical_json.hpp"
#include "htp/case_model.hpp"
#include "htp/outcome.hpp"

namespace htp {

enum class BackendKind { Generate, Embed };

std::string_view to_string(BackendKind kind);

/// Embedding width of the default remote embedding profile.
inline constexpr std::size_t kDefaultRemoteEmbeddingDim = 2048;

struct BackendSpec {
    std::string name;
    BackendKind kind = BackendKind::Generate;
    std::string endpoint;
    std::string model_id;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 2;
    std::string api_key_env;
    /// Declared embedding width; remote embed backends default to 2048.
    std::optional<std::size_t> expected_dim;
    /// Vendor body layout with {{placeholders}}; empty means the default
    /// chat-completion / embedding layout for `kind`.
    Json request_template;
    /// JSON pointer to the text (generate) or real array (embed) in responses.
    std::string response_pointer;
    /// When set, the backend is an offline scripted mock loaded from this file.
    std::optional<std::string> mock_script;

    /// Throws Error(Config) when a field is out of range.
    void validate() const;
};

BackendSpec backend_spec_from_json(const Json& j);
Json to_json(const BackendSpec& spec);

struct GenerateRequest {
    /// Absent for text-only stages; those requests never carry image bytes.
    std::optional<DrawingArtifact> image;
    std::string prompt;
    std::string prompt_id;

    /// Throws EmptyText for a blank prompt.
    static GenerateRequest make(std::optional<DrawingArtifact> image, std::string prompt, std::string prompt_id);
};

/// Canonical request envelope: the image is represented by media type and digest.
Json request_envelope(const GenerateRequest& request);
std::string fingerprint(const GenerateRequest& request);
std::string embed_fingerprint(std::string_view text);

struct EmbeddingVector {
    std::vector<double> values;
    std::string source;

    std::size_t dim() const noexcept { return values.size(); }

    /// Throws InvalidArgument for an empty vector and NonFinite for NaN/inf.
    static EmbeddingVector make(std::vector<double> values, std::string source);
};

template <class T>
struct Attempted {
    T value;
    int retry_count = 0;
};

/// A model backend handle. Implementations are safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const std::string& name() const = 0;
    virtual bool supports(BackendKind kind) const = 0;
    virtual std::optional<std::size_t> expected_dim() const { return std::nullopt; }

    virtual Attempted<std::string> complete(const GenerateRequest& request) const = 0;
    virtual Attempted<std::vector<double>> embed(std::string_view text) const = 0;
};

struct GenerationResult {
    InterpretationText text;
    int retry_count = 0;
};

GenerationResult generate_interpretation(const Backend& backend, const GenerateRequest& request);
EmbeddingVector embed_text(const Backend& backend, std::string_view text);

std::vector<Outcome<GenerationResult>> run_batch(const Backend& backend, std::span<const GenerateRequest> requests,
                                                 int parallelism);
std::vector<Outcome<EmbeddingVector>> run_embed_batch(const Backend& backend, std::span<const std::string> texts,
                                                      int parallelism);

// --- scripted mock --------------------------------------------------------

enum class MockFallback { Error, EchoHash };

class ScriptedMock final : public Backend {
public:
    using Response = std::variant<std::string, std::vector<double>>;

    explicit ScriptedMock(std::string name, MockFallback fallback = MockFallback::Error);

    /// Loads an array of {fingerprint, response_text | response_vector}.
    static std::unique_ptr<ScriptedMock> load(std::string name, const std::string& path,
                                              MockFallback fallback = MockFallback::Error);
    static std::unique_ptr<ScriptedMock> from_json(std::string name, const Json& script,
                                                   MockFallback fallback = MockFallback::Error);

    void script(const std::string& fingerprint, Response response);
    void on_generate(const GenerateRequest& request, std::string text);
    void on_embed(std::string_view text, std::vector<double> vector);

    /// Invoked with the request fingerprint before each response; tests use it
    /// to inject latency.
    void set_delay_hook(std::function<void(const std::string&)> hook);

    Json to_script_json() const;
    std::size_t call_count() const noexcept { return calls_.load(); }

    const std::string& name() const override { return name_; }
    bool supports(BackendKind) const override { return true; }
    Attempted<std::string> complete(const GenerateRequest& request) const override;
    Attempted<std::vector<double>> embed(std::string_view text) const override;

private:
    std::optional<Response> lookup(const std::string& fingerprint) const;

    std::string name_;
    MockFallback fallback_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Response> script_;
    std::function<void(const std::string&)> delay_hook_;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Deterministic vector derived from a fingerprint (echo-hash fallback).
std::vector<double> echo_hash_vector(const std::string& fingerprint);

// --- HTTP -------------------------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POST transport. Throws Error(Transport) on connection failure and
/// Error(Timeout) when the deadline passes.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                              const std::string& body, std::chrono::milliseconds timeout) const = 0;
};

class HttplibTransport final : public Transport {
public:
    HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                      const std::string& body, std::chrono::milliseconds timeout) const override;
};

/// Exponential backoff with full jitter: before retry k (0-based) the caller
/// sleeps a uniform duration in [0, min(cap, base * factor^k)].
struct RetryPolicy {
    std::chrono::milliseconds base{250};
    double factor = 2.0;
    std::chrono::milliseconds cap{30000};
    std::function<void(std::chrono::milliseconds)> sleep;

    std::chrono::milliseconds ceiling(int retry) const;
    std::chrono::milliseconds delay(int retry) const;
};

class HttpBackend final : public Backend {
public:
    HttpBackend(BackendSpec spec, std::shared_ptr<const Transport> transport, RetryPolicy policy = {});

    const std::string& name() const override { return spec_.name; }
    bool supports(BackendKind kind) const override { return kind == spec_.kind; }
    std::optional<std::size_t> expected_dim() const override;
    Attempted<std::string> complete(const GenerateRequest& request) const override;
    Attempted<std::vector<double>> embed(std::string_view text) const override;

    /// Request body the adapter would send; exposed for inspection in tests.
    Json render_body(const std::map<std::string, std::string>& vars, bool has_image) const;

private:
    Attempted<Json> post_with_retries(const Json& body) const;

    BackendSpec spec_;
    std::shared_ptr<const Transport> transport_;
    RetryPolicy policy_;
};

/// Builds an HttpBackend or, when `spec.mock_script` is set, a ScriptedMock.
std::shared_ptr<const Backend> make_backend(const BackendSpec& spec,
                                            std::shared_ptr<const Transport> transport = nullptr);

/// Wraps a backend and captures every successful response as a mock script entry.
class RecordingBackend final : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<const Backend> inner) : inner_(std::move(inner)) {}

    const std::string& name() const override { return inner_->name(); }
    bool supports(BackendKind kind) const override { return inner_->supports(kind); }
    std::optional<std::size_t> expected_dim() const override { return inner_->expected_dim(); }
    Attempted<std::string> complete(const GenerateRequest& request) const override;
    Attempted<std::vector<double>> embed(std::string_view text) const override;

    Json script_json() const;

private:
    std::shared_ptr<const Backend> inner_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, ScriptedMock::Response> captured_;
};

}  // namespace htp
