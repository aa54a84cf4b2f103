#pragma once

#include <map>
#include <string>

#include <json.hpp>

namespace sciforge::config {

using ordered_json = nlohmann::ordered_json;

/// Effective configuration with provenance. Precedence:
/// flag > config file > environment > default. Defaults that restate a
/// published hyperparameter are marked "paper-default"; everything else
/// is "toolkit-default".
class ToolkitConfig {
public:
    struct Entry {
        ordered_json value;
        std::string origin;
    };

    /// Full default table (every known key).
    static ToolkitConfig defaults();

    /// Overlays SCIFORGE_* environment variables (endpoint descriptors
    /// and credentials).
    void load_env();

    /// Overlays a flat JSON object of {"dotted.key": value}.
    void load_file(const std::string& path);

    /// Overlays one explicit flag value (highest precedence).
    void set_flag(const std::string& key, ordered_json value);

    bool has(const std::string& key) const;
    double number(const std::string& key) const;
    long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::string str(const std::string& key) const;
    const Entry& entry(const std::string& key) const;

    /// {key: {value, origin}} for manifests.
    ordered_json render() const;
    std::string digest() const;

private:
    void overlay(const std::string& key, ordered_json value, const std::string& origin);
    std::map<std::string, Entry> entries_;
};

}  // namespace sciforge::config
