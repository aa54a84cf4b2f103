#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sciforge/config.hpp"
#include "sciforge/corpus.hpp"
#include "sciforge/reward.hpp"

namespace httplib {
class Server;
}

namespace sciforge::service {

using corpus::ordered_json;

/// One reward request, as carried by both the batch JSONL lines and the
/// /v1/reward body.
struct RewardRequest {
    std::optional<std::string> id;
    corpus::QuestionRecord record;  // question/reference/verification/rubrics
    std::string rollout_text;
    std::optional<bool> gate;
};

/// Parses and validates a request object. Invalid bodies raise
/// BadRequest with the offending field path.
class BadRequest : public std::runtime_error {
public:
    BadRequest(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

RewardRequest parse_reward_request(const ordered_json& j);

/// Canonical breakdown serialization shared by batch mode and the HTTP
/// endpoint, byte-identical between the two.
ordered_json breakdown_to_json(const reward::RewardBreakdown& b,
                               const std::optional<std::string>& id);

struct BatchCounts {
    long requests = 0;
    long scored = 0;
    long failed = 0;
    std::vector<double> rewards;  // one entry per scored request, in order
};

/// Scores every request in a JSONL file and writes one breakdown per
/// line. A failing line never aborts the batch; it produces an error
/// object in place of a breakdown.
BatchCounts reward_batch(const std::string& in_path, const std::string& out_path,
                         chat::ChatClient* judge, const reward::RewardConfig& cfg,
                         corpus::ErrorPolicy policy = corpus::ErrorPolicy::Fail);

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    int port = 8490;
};

/// Stateless reward endpoint:
///   POST /v1/reward  -> RewardBreakdown JSON
///   POST /v1/verify  -> {"j_ans": 0|1}
///   GET  /healthz    -> {"status":"ok"}
/// Malformed bodies get 400 with the field path; judge backend
/// exhaustion gets 503 with Retry-After.
std::unique_ptr<httplib::Server> make_reward_server(chat::ChatClient* judge,
                                                    const reward::RewardConfig& cfg);

/// Machine-readable run manifest. Wall-clock duration is the only
/// non-reproducible field and lives nowhere else.
class ManifestBuilder {
public:
    ManifestBuilder(std::string subcommand, const config::ToolkitConfig& cfg);
    void add_input(const std::string& path);
    void add_output(const std::string& path, long records);
    void add_count(const std::string& name, long value);
    void set_elapsed_ms(long ms);
    ordered_json build() const;
    void write(const std::string& path) const;

private:
    std::string subcommand_;
    ordered_json config_;
    std::string config_digest_;
    ordered_json inputs_ = ordered_json::array();
    ordered_json outputs_ = ordered_json::array();
    ordered_json counts_ = ordered_json::object();
    long elapsed_ms_ = -1;
};

/// Digest of a file's bytes (streaming FNV-1a), as "fnv1a64:<hex>".
std::string file_digest(const std::string& path);

/// Corpus statistics: subject histogram, verification split, token-length
/// distributions (coverage tokenizer), and the nine-bin k/8 difficulty
/// histogram.
ordered_json stats_report(const std::vector<corpus::QuestionRecord>& records);

}  // namespace sciforge::service
