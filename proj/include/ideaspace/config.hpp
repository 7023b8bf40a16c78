#pragma once

// Runtime configuration: one JSON file ("v": 1), then IDEASPACE_* environment
// overrides, then command-line flags (applied by the caller). Unknown keys
// are rejected so typos fail loudly.
//
// {
//   "v": 1,
//   "backend": "synthetic" | "http",
//   "forward": {"base_url", "path", "adapter", "response_field", "timeout_s", "max_attempts"},
//   "reverse": {... same ...},
//   "templates": {"forward": "<text with {{statement}}>", "reverse": "..."},
//   "k": 4, "max_depth": 6, "visited_cache": true, "child_order": "generated_first" | "retrieved_first",
//   "temperature": {"base": 0.7, "burst_width": 0.1},
//   "store": {"path": "ideas.jsonl", "synthetic_size": 313, "synthetic_seed": 1},
//   "service": {"host": "127.0.0.1", "port": 8080, "session_ttl_s": 86400, "max_in_flight": 64}
// }

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/http_backend.hpp"
#include "ideaspace/traversal.hpp"

namespace ideaspace {

struct Config {
    std::string backend = "synthetic";
    HttpEndpoint forward{.adapter = "ProblemSolution"};
    HttpEndpoint reverse{.adapter = "SolutionProblem"};
    PromptTemplates templates{};
    TraversalOptions traversal{};
    double base_temperature = 0.7;
    double burst_width = 0.1;
    std::string store_path;  // empty: generated synthetic store
    std::size_t synthetic_store_size = 313;
    std::uint64_t synthetic_store_seed = 1;
    std::string host = "127.0.0.1";
    int port = 8080;
    double session_ttl_s = 24.0 * 3600.0;
    std::size_t max_in_flight = 64;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be an object", 0);
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ParseError("unknown config key " + where + "." + key, 0);
    }
}

inline void read_endpoint(const nlohmann::json& j, HttpEndpoint& ep, const std::string& where) {
    check_keys(j, {"base_url", "path", "adapter", "response_field", "timeout_s", "max_attempts"}, where);
    if (j.contains("base_url")) ep.base_url = j["base_url"].get<std::string>();
    if (j.contains("path")) ep.path = j["path"].get<std::string>();
    if (j.contains("adapter")) ep.adapter = j["adapter"].get<std::string>();
    if (j.contains("response_field")) ep.response_field = j["response_field"].get<std::string>();
    if (j.contains("timeout_s")) ep.timeout_s = j["timeout_s"].get<double>();
    if (j.contains("max_attempts")) ep.max_attempts = j["max_attempts"].get<int>();
}

inline ChildOrder parse_child_order(const std::string& s) {
    if (s == "generated_first") return ChildOrder::GeneratedFirst;
    if (s == "retrieved_first") return ChildOrder::RetrievedFirst;
    throw ParseError("child_order must be generated_first or retrieved_first", 0);
}

}  // namespace detail

inline Config config_from_json(const nlohmann::json& j) {
    using detail::check_keys;
    Config c;
    check_keys(j, {"v", "backend", "forward", "reverse", "templates", "k", "max_depth", "visited_cache",
                   "child_order", "temperature", "store", "service"},
               "config");
    if (!j.contains("v") || j["v"] != 1) throw ParseError("config must declare \"v\": 1", 0);
    try {
        if (j.contains("backend")) c.backend = j["backend"].get<std::string>();
        if (j.contains("forward")) detail::read_endpoint(j["forward"], c.forward, "forward");
        if (j.contains("reverse")) detail::read_endpoint(j["reverse"], c.reverse, "reverse");
        if (j.contains("templates")) {
            check_keys(j["templates"], {"forward", "reverse"}, "templates");
            if (j["templates"].contains("forward")) c.templates.forward = PromptTemplate(j["templates"]["forward"].get<std::string>());
            if (j["templates"].contains("reverse")) c.templates.reverse = PromptTemplate(j["templates"]["reverse"].get<std::string>());
        }
        if (j.contains("k")) c.traversal.k = j["k"].get<std::size_t>();
        if (j.contains("max_depth")) c.traversal.max_depth = j["max_depth"].get<int>();
        if (j.contains("visited_cache")) c.traversal.visited_cache = j["visited_cache"].get<bool>();
        if (j.contains("child_order")) c.traversal.child_order = detail::parse_child_order(j["child_order"].get<std::string>());
        if (j.contains("temperature")) {
            const auto& t = j["temperature"];
            check_keys(t, {"base", "burst_width"}, "temperature");
            if (t.contains("base")) c.base_temperature = t["base"].get<double>();
            if (t.contains("burst_width")) c.burst_width = t["burst_width"].get<double>();
        }
        if (j.contains("store")) {
            const auto& s = j["store"];
            check_keys(s, {"path", "synthetic_size", "synthetic_seed"}, "store");
            if (s.contains("path")) c.store_path = s["path"].get<std::string>();
            if (s.contains("synthetic_size")) c.synthetic_store_size = s["synthetic_size"].get<std::size_t>();
            if (s.contains("synthetic_seed")) c.synthetic_store_seed = s["synthetic_seed"].get<std::uint64_t>();
        }
        if (j.contains("service")) {
            const auto& s = j["service"];
            check_keys(s, {"host", "port", "session_ttl_s", "max_in_flight"}, "service");
            if (s.contains("host")) c.host = s["host"].get<std::string>();
            if (s.contains("port")) c.port = s["port"].get<int>();
            if (s.contains("session_ttl_s")) c.session_ttl_s = s["session_ttl_s"].get<double>();
            if (s.contains("max_in_flight")) c.max_in_flight = s["max_in_flight"].get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what(), 0);
    }
    return c;
}

inline Config load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what(), 0);
    }
}

// IDEASPACE_BACKEND, IDEASPACE_FORWARD_URL, IDEASPACE_REVERSE_URL, IDEASPACE_K,
// IDEASPACE_MAX_DEPTH, IDEASPACE_BASE_TEMPERATURE, IDEASPACE_BURST_WIDTH,
// IDEASPACE_STORE, IDEASPACE_HOST, IDEASPACE_PORT.
inline void apply_env(Config& c, const EnvLookup& env = process_env) {
    auto num = [&](const std::string& name, auto& field) {
        if (auto v = env(name)) {
            try {
                using T = std::decay_t<decltype(field)>;
                if constexpr (std::is_floating_point_v<T>) {
                    field = std::stod(*v);
                } else {
                    field = static_cast<T>(std::stoll(*v));
                }
            } catch (const std::exception&) {
                throw ParseError(name + " is not a number: " + *v, 0);
            }
        }
    };
    if (auto v = env("IDEASPACE_BACKEND")) c.backend = *v;
    if (auto v = env("IDEASPACE_FORWARD_URL")) c.forward.base_url = *v;
    if (auto v = env("IDEASPACE_REVERSE_URL")) c.reverse.base_url = *v;
    if (auto v = env("IDEASPACE_STORE")) c.store_path = *v;
    if (auto v = env("IDEASPACE_HOST")) c.host = *v;
    num("IDEASPACE_K", c.traversal.k);
    num("IDEASPACE_MAX_DEPTH", c.traversal.max_depth);
    num("IDEASPACE_BASE_TEMPERATURE", c.base_temperature);
    num("IDEASPACE_BURST_WIDTH", c.burst_width);
    num("IDEASPACE_PORT", c.port);
}

// File (if given), then environment. Flags are applied afterwards by the caller.
inline Config resolve_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env) {
    Config c = file ? load_config_file(*file) : Config{};
    apply_env(c, env);
    if (c.backend != "synthetic" && c.backend != "http") throw ParseError("backend must be synthetic or http", 0);
    return c;
}

}  // namespace ideaspace
