#pragma once

// Human-steered exploration over HTTP+JSON. Each session owns one
// exploration tree; requests to a session are serialized by its mutex and
// different sessions proceed in parallel.
//
//   POST /sessions                    {problem_text, k?, max_depth?, base_temperature?, burst_width?, seed?}
//   POST /sessions/{id}/expand        {node_id}
//   POST /sessions/{id}/regenerate    {node_id, seed?}
//   GET  /sessions/{id}/tree
//   GET  /healthz

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/random.hpp"
#include "ideaspace/traversal.hpp"

namespace ideaspace {

struct ServiceOptions {
    TraversalOptions traversal{};
    double base_temperature = 0.7;
    double burst_width = 0.1;
    double session_ttl_s = 24.0 * 3600.0;
    std::size_t max_in_flight = 64;
    std::uint64_t id_seed = 0;  // session id generator seed
    std::function<double()> clock = [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

class ExplorationService {
public:
    ExplorationService(std::shared_ptr<const IdeaStore> store, std::shared_ptr<const Generator> gen,
                       ServiceOptions opts = {})
        : store_(std::move(store)), gen_(std::move(gen)), opts_(std::move(opts)), id_rng_(opts_.id_seed) {
        if (!store_ || !gen_) throw ContractViolation("service needs a store and a generator");
    }

    ExplorationService(const ExplorationService&) = delete;
    ExplorationService& operator=(const ExplorationService&) = delete;

    std::size_t session_count() const {
        std::lock_guard lock(mu_);
        return sessions_.size();
    }

    std::size_t evict_expired() {
        const double now = opts_.clock();
        std::lock_guard lock(mu_);
        std::size_t evicted = 0;
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second->last_active.load() > opts_.session_ttl_s) {
                it = sessions_.erase(it);
                ++evicted;
            } else {
                ++it;
            }
        }
        return evicted;
    }

    // Dispatches one request. `body` is the raw request body (may be empty).
    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body = {}) {
        InFlight guard(in_flight_);
        if (guard.count > opts_.max_in_flight) return error(503, "too many requests in flight");
        evict_expired();

        static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)/(expand|regenerate|tree)$)");
        try {
            if (path == "/healthz" && method == "GET") return healthz();
            if (path == "/sessions" && method == "POST") return create_session(parse_body(body));
            std::smatch m;
            if (std::regex_match(path, m, session_re)) {
                const std::string id = m[1], action = m[2];
                if (action == "tree" && method == "GET") return get_tree(id);
                if (action == "expand" && method == "POST") return expand(id, parse_body(body));
                if (action == "regenerate" && method == "POST") return regenerate(id, parse_body(body));
                return error(405, "method not allowed");
            }
            return error(404, "no route for " + method + " " + path);
        } catch (const BadRequest& e) {
            return error(400, e.what());
        } catch (const NotFoundError& e) {
            return error(404, e.what());
        } catch (const StateError& e) {
            return error(409, e.what());
        } catch (const DepthError& e) {
            return error(422, e.what());
        } catch (const ContractViolation& e) {
            return error(400, e.what());
        } catch (const TransportError& e) {
            return error(503, std::string("backend unavailable: ") + e.what());
        } catch (const GenerationError& e) {
            return error(502, e.what());
        } catch (const std::exception& e) {
            return error(500, e.what());
        }
    }

    // Routes the endpoints on an httplib server, with permissive CORS for
    // the browser client.
    void bind(httplib::Server& server) {
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            const ApiResponse r = handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server.Get("/healthz", forward);
        server.Post("/sessions", forward);
        server.Post(R"(/sessions/([^/]+)/(expand|regenerate))", forward);
        server.Get(R"(/sessions/([^/]+)/tree)", forward);
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        });
    }

private:
    struct BadRequest : std::runtime_error {
        using std::runtime_error::runtime_error;
    };

    struct Session {
        Session(std::string id, ExplorationTree t, double now) : id(std::move(id)), tree(std::move(t)), created_at(now), last_active(now) {}
        std::string id;
        std::mutex mu;
        ExplorationTree tree;
        double created_at;
        std::atomic<double> last_active;
    };

    struct InFlight {
        explicit InFlight(std::atomic<std::size_t>& c) : counter(c), count(++c) {}
        ~InFlight() { --counter; }
        std::atomic<std::size_t>& counter;
        std::size_t count;
    };

    static ApiResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

    static nlohmann::json parse_body(const std::string& body) {
        if (body.empty()) return nlohmann::json::object();
        try {
            auto j = nlohmann::json::parse(body);
            if (!j.is_object()) throw BadRequest("request body must be a JSON object");
            return j;
        } catch (const nlohmann::json::parse_error&) {
            throw BadRequest("request body is not valid JSON");
        }
    }

    template <typename T>
    static std::optional<T> field(const nlohmann::json& j, const char* name) {
        if (!j.contains(name) || j[name].is_null()) return std::nullopt;
        try {
            return j[name].get<T>();
        } catch (const nlohmann::json::exception&) {
            throw BadRequest(std::string("field \"") + name + "\" has the wrong type");
        }
    }

    static NodeId node_id_of(const nlohmann::json& j) {
        auto id = field<NodeId>(j, "node_id");
        if (!id) throw BadRequest("missing node_id");
        return *id;
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown session " + id);
        it->second->last_active = opts_.clock();
        return it->second;
    }

    std::string new_session_id() {
        std::lock_guard lock(mu_);
        char buf[24];
        std::uint64_t v;
        do {
            v = id_rng_();
            std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(v));
        } while (sessions_.count(buf));
        return buf;
    }

    static nlohmann::json child_json(const ExplorationTree& tree, NodeId id) {
        auto j = node_to_json(tree.node(id));
        j["generated"] = is_generated(tree.node(id).origin);
        return j;
    }

    ApiResponse healthz() const {
        auto backend_id = [&](Direction d) -> nlohmann::json {
            const auto* b = gen_->backend_for(d);
            return b ? nlohmann::json(b->id()) : nlohmann::json(nullptr);
        };
        nlohmann::json backend{{"forward", backend_id(Direction::ProblemToSolution)},
                               {"reverse", backend_id(Direction::SolutionToProblem)}};
        nlohmann::json store{{"records", store_->size()}, {"embedder", store_->embedder().id()}, {"ready", !store_->empty()}};
        return {200, {{"status", store_->empty() ? "degraded" : "ok"}, {"backend", backend}, {"store", store},
                      {"sessions", session_count()}}};
    }

    ApiResponse create_session(const nlohmann::json& req) {
        const auto text = field<std::string>(req, "problem_text");
        if (!text || trim(*text).empty()) throw BadRequest("problem_text must be a non-empty string");
        TraversalOptions topts = opts_.traversal;
        if (auto k = field<std::size_t>(req, "k")) topts.k = *k;
        if (auto d = field<int>(req, "max_depth")) {
            if (*d < 1) throw BadRequest("max_depth must be positive");
            topts.max_depth = *d;
        }
        const double base = field<double>(req, "base_temperature").value_or(opts_.base_temperature);
        const double burst = field<double>(req, "burst_width").value_or(opts_.burst_width);
        if (!(base >= 0.0) || !(burst >= 0.0)) throw BadRequest("temperatures must be non-negative");

        const std::string id = new_session_id();
        const std::uint64_t seed = field<std::uint64_t>(req, "seed").value_or(fnv1a64(id));
        auto session = std::make_shared<Session>(id, ExplorationTree(id, Statement::problem(*text), topts,
                                                                     TemperatureSchedule(base, burst, seed)),
                                                 opts_.clock());
        nlohmann::json root = node_to_json(session->tree.node(0));
        {
            std::lock_guard lock(mu_);
            sessions_.emplace(id, std::move(session));
        }
        return {201, {{"session_id", id}, {"root", std::move(root)}}};
    }

    ApiResponse expand(const std::string& sid, const nlohmann::json& req) {
        auto s = find(sid);
        const NodeId node = node_id_of(req);
        std::lock_guard lock(s->mu);
        const auto added = s->tree.expand(node, *store_, *gen_);
        return {200, expansion_json(*s, node, added)};
    }

    ApiResponse regenerate(const std::string& sid, const nlohmann::json& req) {
        auto s = find(sid);
        const NodeId node = node_id_of(req);
        const auto seed = field<std::uint64_t>(req, "seed");
        std::lock_guard lock(s->mu);
        const auto r = s->tree.regenerate(node, *store_, *gen_, seed);
        auto body = expansion_json(*s, node, r.added);
        body["removed"] = r.removed;
        return {200, std::move(body)};
    }

    nlohmann::json expansion_json(const Session& s, NodeId node, const std::vector<NodeId>& added) const {
        const auto& n = s.tree.node(node);
        nlohmann::json children = nlohmann::json::array();
        for (NodeId c : added) children.push_back(child_json(s.tree, c));
        return {{"session_id", s.id},
                {"node_id", node},
                {"solution_text", n.generated_solution ? n.generated_solution->text() : ""},
                {"temperature_used", n.temperature_used.value_or(0.0)},
                {"children", std::move(children)}};
    }

    ApiResponse get_tree(const std::string& sid) {
        auto s = find(sid);
        std::lock_guard lock(s->mu);
        return {200, s->tree.to_json()};
    }

    std::shared_ptr<const IdeaStore> store_;
    std::shared_ptr<const Generator> gen_;
    ServiceOptions opts_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    Rng id_rng_;
    std::atomic<std::size_t> in_flight_{0};
};

}  // namespace ideaspace
