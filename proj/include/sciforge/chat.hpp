#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sciforge::chat {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct SamplingParams {
    double temperature = 0.7;
    double top_p = 0.8;
    int top_k = 20;
    int max_tokens = 2048;
};

struct ChatError {
    enum class Kind { Transport, Status, Parse, Script };
    Kind kind = Kind::Transport;
    std::string message;
    int http_status = 0;
};

struct ChatResult {
    std::string text;
    std::optional<ChatError> error;

    bool ok() const { return !error.has_value(); }
    static ChatResult success(std::string t) { return {std::move(t), std::nullopt}; }
    static ChatResult failure(ChatError e) { return {{}, std::move(e)}; }
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResult complete(const std::vector<ChatMessage>& messages,
                                const SamplingParams& params) = 0;
};

/// Stable key over message roles and contents; used to address transcript
/// entries. Sampling parameters are excluded so replays survive default
/// changes.
std::uint64_t request_key(const std::vector<ChatMessage>& messages);
std::string request_key_hex(const std::vector<ChatMessage>& messages);

struct EndpointConfig {
    std::string base_url;  // e.g. http://host:port/v1
    std::string model;
    std::string api_key;
    int connect_timeout_s = 10;
    int read_timeout_s = 300;
};

/// OpenAI-style /chat/completions client.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig cfg);
    ~HttpChatClient() override;
    ChatResult complete(const std::vector<ChatMessage>& messages,
                        const SamplingParams& params) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Deterministic offline backend. Resolution order per request:
///   1. exact key rule ({"key": "<16-hex>", "response": ...})
///   2. first substring rule matching the last user message
///      ({"match": "...", "response": ...}, file order)
///   3. next unconsumed sequence response ({"sequence": [...]})
///   4. default rule ({"response": ...} with no key/match)
/// No rule matched -> Script error (simulates backend failure).
class ScriptedChatClient : public ChatClient {
public:
    ScriptedChatClient() = default;
    static ScriptedChatClient from_file(const std::string& path);

    void add_keyed(std::string key_hex, std::string response);
    void add_match(std::string needle, std::string response);
    void push_sequence(std::string response);
    void set_default(std::string response);

    ChatResult complete(const std::vector<ChatMessage>& messages,
                        const SamplingParams& params) override;

    long calls() const { return calls_; }

private:
    struct MatchRule {
        std::string needle;
        std::string response;
    };
    std::vector<std::pair<std::string, std::string>> keyed_;
    std::vector<MatchRule> matches_;
    std::vector<std::string> sequence_;
    std::optional<std::string> default_;
    size_t next_seq_ = 0;
    long calls_ = 0;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

/// Wraps a client and appends {key, messages, response} JSONL entries to
/// a transcript file, which ScriptedChatClient::from_file can replay.
class RecordingChatClient : public ChatClient {
public:
    RecordingChatClient(ChatClient& inner, std::string transcript_path);
    ChatResult complete(const std::vector<ChatMessage>& messages,
                        const SamplingParams& params) override;

private:
    ChatClient& inner_;
    std::string path_;
    std::mutex mu_;
};

/// Retries transient failures (transport errors, HTTP 429/5xx) with a
/// fixed backoff. Parse/script errors are not retried here; callers own
/// semantic retries.
class RetryingChatClient : public ChatClient {
public:
    RetryingChatClient(ChatClient& inner, int max_attempts = 3, int backoff_ms = 200);
    ChatResult complete(const std::vector<ChatMessage>& messages,
                        const SamplingParams& params) override;

private:
    ChatClient& inner_;
    int max_attempts_;
    int backoff_ms_;
};

}  // namespace sciforge::chat
