#include "sciforge/chat.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sciforge/corpus.hpp"
#include "sciforge/text.hpp"

namespace sciforge::chat {

using nlohmann::ordered_json;

std::uint64_t request_key(const std::vector<ChatMessage>& messages) {
    std::string joined;
    for (const auto& m : messages) {
        joined += m.role;
        joined.push_back('\x1e');
        joined += m.content;
        joined.push_back('\x1e');
    }
    return text::fnv1a64(joined);
}

std::string request_key_hex(const std::vector<ChatMessage>& messages) {
    return text::hex64(request_key(messages));
}

// ---------------------------------------------------------------------------
// HttpChatClient

struct HttpChatClient::Impl {
    EndpointConfig cfg;
    std::unique_ptr<httplib::Client> client;
    std::string path;
};

namespace {

// Splits "http://host:port/v1" into client base and request path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
    size_t scheme = url.find("://");
    size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    size_t slash = url.find('/', host_start);
    if (slash == std::string::npos) return {url, ""};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpChatClient::HttpChatClient(EndpointConfig cfg) : impl_(std::make_unique<Impl>()) {
    impl_->cfg = std::move(cfg);
    auto [base, path] = split_url(impl_->cfg.base_url);
    impl_->client = std::make_unique<httplib::Client>(base);
    impl_->client->set_connection_timeout(impl_->cfg.connect_timeout_s, 0);
    impl_->client->set_read_timeout(impl_->cfg.read_timeout_s, 0);
    impl_->path = path;
}

HttpChatClient::~HttpChatClient() = default;

ChatResult HttpChatClient::complete(const std::vector<ChatMessage>& messages,
                                    const SamplingParams& params) {
    ordered_json body;
    body["model"] = impl_->cfg.model;
    ordered_json msgs = ordered_json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(msgs);
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    if (params.top_k > 0) body["top_k"] = params.top_k;
    body["max_tokens"] = params.max_tokens;

    httplib::Headers headers;
    if (!impl_->cfg.api_key.empty())
        headers.emplace("Authorization", "Bearer " + impl_->cfg.api_key);

    auto res = impl_->client->Post(impl_->path + "/chat/completions", headers, body.dump(),
                                   "application/json");
    if (!res)
        return ChatResult::failure({ChatError::Kind::Transport,
                                    "transport error: " + httplib::to_string(res.error()), 0});
    if (res->status < 200 || res->status >= 300)
        return ChatResult::failure({ChatError::Kind::Status,
                                    "http status " + std::to_string(res->status) + ": " + res->body,
                                    res->status});
    try {
        auto j = ordered_json::parse(res->body);
        return ChatResult::success(j.at("choices").at(0).at("message").at("content").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        return ChatResult::failure({ChatError::Kind::Parse,
                                    std::string("unexpected completion payload: ") + e.what(), 0});
    }
}

// ---------------------------------------------------------------------------
// ScriptedChatClient

ScriptedChatClient ScriptedChatClient::from_file(const std::string& path) {
    ScriptedChatClient client;
    corpus::JsonlReader reader(path, corpus::ErrorPolicy::Fail);
    while (auto j = reader.next_json()) {
        if (j->contains("sequence")) {
            for (const auto& r : j->at("sequence")) client.push_sequence(r.get<std::string>());
        } else if (j->contains("key")) {
            client.add_keyed(j->at("key").get<std::string>(), j->at("response").get<std::string>());
        } else if (j->contains("match")) {
            client.add_match(j->at("match").get<std::string>(), j->at("response").get<std::string>());
        } else if (j->contains("response")) {
            client.set_default(j->at("response").get<std::string>());
        } else {
            throw corpus::CorpusError("transcript line " + std::to_string(reader.line_number()) +
                                      " has none of key/match/sequence/response");
        }
    }
    return client;
}

void ScriptedChatClient::add_keyed(std::string key_hex, std::string response) {
    keyed_.emplace_back(std::move(key_hex), std::move(response));
}

void ScriptedChatClient::add_match(std::string needle, std::string response) {
    matches_.push_back({std::move(needle), std::move(response)});
}

void ScriptedChatClient::push_sequence(std::string response) {
    sequence_.push_back(std::move(response));
}

void ScriptedChatClient::set_default(std::string response) { default_ = std::move(response); }

ChatResult ScriptedChatClient::complete(const std::vector<ChatMessage>& messages,
                                        const SamplingParams&) {
    std::lock_guard lock(*mu_);
    ++calls_;
    std::string key = request_key_hex(messages);
    for (const auto& [k, response] : keyed_)
        if (k == key) return ChatResult::success(response);
    const std::string* last_user = nullptr;
    for (const auto& m : messages)
        if (m.role == "user") last_user = &m.content;
    if (last_user)
        for (const auto& rule : matches_)
            if (last_user->find(rule.needle) != std::string::npos)
                return ChatResult::success(rule.response);
    if (next_seq_ < sequence_.size()) return ChatResult::success(sequence_[next_seq_++]);
    if (default_) return ChatResult::success(*default_);
    return ChatResult::failure({ChatError::Kind::Script, "no scripted response for key " + key, 0});
}

// ---------------------------------------------------------------------------
// RecordingChatClient

RecordingChatClient::RecordingChatClient(ChatClient& inner, std::string transcript_path)
    : inner_(inner), path_(std::move(transcript_path)) {}

ChatResult RecordingChatClient::complete(const std::vector<ChatMessage>& messages,
                                         const SamplingParams& params) {
    ChatResult result = inner_.complete(messages, params);
    if (result.ok()) {
        std::lock_guard lock(mu_);
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        ordered_json entry;
        entry["key"] = request_key_hex(messages);
        ordered_json msgs = ordered_json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        entry["messages"] = std::move(msgs);
        entry["response"] = result.text;
        out << entry.dump() << '\n';
    }
    return result;
}

// ---------------------------------------------------------------------------
// RetryingChatClient

RetryingChatClient::RetryingChatClient(ChatClient& inner, int max_attempts, int backoff_ms)
    : inner_(inner), max_attempts_(max_attempts), backoff_ms_(backoff_ms) {}

ChatResult RetryingChatClient::complete(const std::vector<ChatMessage>& messages,
                                        const SamplingParams& params) {
    ChatResult result;
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
        result = inner_.complete(messages, params);
        if (result.ok()) return result;
        bool transient = result.error->kind == ChatError::Kind::Transport ||
                         (result.error->kind == ChatError::Kind::Status &&
                          (result.error->http_status == 429 || result.error->http_status >= 500));
        if (!transient) return result;
        if (attempt + 1 < max_attempts_)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << attempt));
    }
    return result;
}

}  // namespace sciforge::chat
