#include <catch_amalgamated.hpp>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ideaspace/config.hpp"
#include "ideaspace/http_backend.hpp"
#include "ideaspace/service.hpp"
#include "ideaspace/synthetic.hpp"

using namespace ideaspace;
using nlohmann::json;

namespace {

struct Fixture {
    std::shared_ptr<SyntheticWorld> world = std::make_shared<SyntheticWorld>();
    std::shared_ptr<IdeaStore> store;
    std::shared_ptr<Generator> gen = make_synthetic_generator(world);
    double now = 1000.0;

    Fixture() {
        store = std::make_shared<IdeaStore>(std::make_shared<SyntheticEmbedder>(world));
        for (auto& r : synthetic_records(*world, 313, 1)) store->insert(std::move(r));
    }

    ServiceOptions options() {
        ServiceOptions o;
        o.clock = [this] { return now; };
        return o;
    }
};

std::string create(ExplorationService& svc, json body = {{"problem_text", "Costs are rising."}}) {
    const auto r = svc.handle("POST", "/sessions", body.dump());
    REQUIRE(r.status == 201);
    return r.body["session_id"].get<std::string>();
}

// Serves a handler on an ephemeral port for the lifetime of the object.
struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    template <typename Setup>
    explicit LocalServer(Setup setup) {
        setup(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("session lifecycle and status codes", "[service]") {
    Fixture f;
    ExplorationService svc(f.store, f.gen, f.options());

    CHECK(svc.handle("POST", "/sessions", R"({"problem_text":"  "})").status == 400);
    CHECK(svc.handle("POST", "/sessions", "not json").status == 400);
    CHECK(svc.handle("POST", "/sessions", "[1]").status == 400);
    CHECK(svc.handle("POST", "/sessions", R"({"problem_text":"x","k":"four"})").status == 400);
    CHECK(svc.handle("POST", "/sessions", R"({"problem_text":"x","max_depth":0})").status == 400);

    const auto created = svc.handle("POST", "/sessions", R"({"problem_text":"Costs are rising."})");
    REQUIRE(created.status == 201);
    const std::string sid = created.body["session_id"];
    CHECK(created.body["root"]["node_id"] == 0);
    CHECK(created.body["root"]["problem_text"] == "Costs are rising.");

    auto tree = svc.handle("GET", "/sessions/" + sid + "/tree");
    CHECK(tree.status == 200);
    CHECK(tree.body["nodes"].size() == 1);

    const auto ex = svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":0})");
    REQUIRE(ex.status == 200);
    CHECK(ex.body["children"].size() == 5);  // default k = 4
    int generated = 0;
    for (const auto& c : ex.body["children"]) generated += c["generated"].get<bool>() ? 1 : 0;
    CHECK(generated == 1);
    CHECK_FALSE(ex.body["solution_text"].get<std::string>().empty());
    CHECK(ex.body["temperature_used"].get<double>() >= 0.7);

    CHECK(svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":0})").status == 409);
    CHECK(svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":999})").status == 404);
    CHECK(svc.handle("POST", "/sessions/" + sid + "/expand", "{}").status == 400);
    CHECK(svc.handle("POST", "/sessions/nope/expand", R"({"node_id":0})").status == 404);
    CHECK(svc.handle("GET", "/sessions/" + sid + "/expand").status == 405);
    CHECK(svc.handle("GET", "/nothing").status == 404);

    const NodeId child = ex.body["children"][0]["node_id"];
    CHECK(svc.handle("POST", "/sessions/" + sid + "/expand", json{{"node_id", child}}.dump()).status == 200);
    tree = svc.handle("GET", "/sessions/" + sid + "/tree");
    CHECK(tree.body["nodes"].size() == 11);

    const auto regen = svc.handle("POST", "/sessions/" + sid + "/regenerate", R"({"node_id":0,"seed":5})");
    REQUIRE(regen.status == 200);
    CHECK(regen.body["removed"].size() == 10);
    CHECK(regen.body["children"].size() == 5);
    CHECK(svc.handle("POST", "/sessions/" + sid + "/regenerate", json{{"node_id", child}}.dump()).status == 404);

    const auto health = svc.handle("GET", "/healthz");
    CHECK(health.status == 200);
    CHECK(health.body["status"] == "ok");
    CHECK(health.body["store"]["records"] == 313);
    CHECK(health.body["sessions"] == 1);
}

TEST_CASE("depth limit maps to 422", "[service]") {
    Fixture f;
    ExplorationService svc(f.store, f.gen, f.options());
    const auto sid = create(svc, {{"problem_text", "Costs are rising."}, {"max_depth", 1}, {"k", 2}});
    const auto ex = svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":0})");
    REQUIRE(ex.status == 200);
    CHECK(ex.body["children"].size() == 3);
    CHECK(svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":1})").status == 422);
}

TEST_CASE("pinned seeds reproduce expansions and regenerations", "[service]") {
    Fixture f;
    ExplorationService svc(f.store, f.gen, f.options());
    const json body{{"problem_text", "Costs are rising."}, {"seed", 9}};
    const auto a = create(svc, body), b = create(svc, body);
    CHECK(a != b);
    const auto ea = svc.handle("POST", "/sessions/" + a + "/expand", R"({"node_id":0})");
    const auto eb = svc.handle("POST", "/sessions/" + b + "/expand", R"({"node_id":0})");
    CHECK(ea.body["solution_text"] == eb.body["solution_text"]);
    const auto ra = svc.handle("POST", "/sessions/" + a + "/regenerate", R"({"node_id":0,"seed":3})");
    const auto rb = svc.handle("POST", "/sessions/" + b + "/regenerate", R"({"node_id":0,"seed":3})");
    CHECK(ra.body["solution_text"] == rb.body["solution_text"]);
    CHECK(ra.body["children"][0]["problem_text"] == rb.body["children"][0]["problem_text"]);
}

TEST_CASE("idle sessions expire", "[service]") {
    Fixture f;
    auto opts = f.options();
    opts.session_ttl_s = 60;
    ExplorationService svc(f.store, f.gen, opts);
    const auto old = create(svc);
    f.now += 30;
    const auto fresh = create(svc);
    f.now += 20;
    CHECK(svc.handle("GET", "/sessions/" + old + "/tree").status == 200);  // touches `old`
    f.now += 35;
    CHECK(svc.evict_expired() == 0);
    f.now += 10;
    CHECK(svc.evict_expired() == 1);  // `fresh` idle 65 s, `old` 45 s
    CHECK(svc.session_count() == 1);
    CHECK(svc.handle("GET", "/sessions/" + fresh + "/tree").status == 404);
    f.now += 100;
    CHECK(svc.handle("GET", "/sessions/" + old + "/tree").status == 404);
    CHECK(svc.session_count() == 0);
}

TEST_CASE("concurrent sessions stay isolated", "[service][concurrency]") {
    Fixture f;
    ExplorationService svc(f.store, f.gen, f.options());
    std::vector<std::string> ids;
    for (int i = 0; i < 6; ++i) ids.push_back(create(svc, {{"problem_text", "Problem number " + std::to_string(i)}}));
    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (const auto& sid : ids) {
        threads.emplace_back([&, sid] {
            if (svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":0})").status != 200) ++failures;
            if (svc.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":1})").status != 200) ++failures;
        });
    }
    for (auto& t : threads) t.join();
    CHECK(failures == 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto tree = svc.handle("GET", "/sessions/" + ids[i] + "/tree").body;
        CHECK(tree["nodes"].size() == 11);
        CHECK(tree["nodes"][0]["problem_text"] == "Problem number " + std::to_string(i));
    }
}

TEST_CASE("backend failures map to 503 and 502", "[service]") {
    Fixture f;
    auto down = std::make_shared<CallbackBackend>("down", [](const std::string&, double, std::optional<std::uint64_t>) -> std::string {
        throw TransportError("refused", 3);
    });
    auto junk = std::make_shared<CallbackBackend>("junk", [](const std::string&, double, std::optional<std::uint64_t>) {
        return std::string("PROBLEM:\nwrong");
    });
    ExplorationService a(f.store, std::make_shared<Generator>(down, down), f.options());
    CHECK(a.handle("POST", "/sessions/" + create(a) + "/expand", R"({"node_id":0})").status == 503);
    ExplorationService b(f.store, std::make_shared<Generator>(junk, junk), f.options());
    const auto sid = create(b);
    CHECK(b.handle("POST", "/sessions/" + sid + "/expand", R"({"node_id":0})").status == 502);
    // A failed expansion leaves the tree untouched.
    CHECK(b.handle("GET", "/sessions/" + sid + "/tree").body["nodes"].size() == 1);

    auto empty = std::make_shared<IdeaStore>(std::make_shared<SyntheticEmbedder>(f.world));
    ExplorationService c(empty, f.gen, f.options());
    CHECK(c.handle("GET", "/healthz").body["status"] == "degraded");
}

TEST_CASE("service over HTTP", "[service][http]") {
    Fixture f;
    ExplorationService svc(f.store, f.gen);
    LocalServer srv([&](httplib::Server& s) { svc.bind(s); });
    httplib::Client cli(srv.url());

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    auto created = cli.Post("/sessions", R"({"problem_text":"Costs are rising."})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string sid = json::parse(created->body)["session_id"];
    auto ex = cli.Post("/sessions/" + sid + "/expand", R"({"node_id":0})", "application/json");
    REQUIRE(ex);
    CHECK(ex->status == 200);
    CHECK(json::parse(ex->body)["children"].size() == 5);
    auto tree = cli.Get("/sessions/" + sid + "/tree");
    REQUIRE(tree);
    CHECK(json::parse(tree->body)["nodes"].size() == 6);
    auto opt = cli.Options("/sessions");
    REQUIRE(opt);
    CHECK(opt->status == 204);
}

TEST_CASE("http backend", "[service][http]") {
    std::atomic<int> hits{0};
    json last;
    LocalServer srv([&](httplib::Server& s) {
        s.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last = json::parse(req.body);
            res.set_content(json{{"text", "SOLUTION:\nok " + last["prompt"].get<std::string>()}}.dump(), "application/json");
        });
        s.Post("/fail", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 500;
        });
        s.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.set_content(R"({"other":1})", "application/json");
        });
        s.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
            res.set_content(R"({"text":"late"})", "application/json");
        });
    });

    HttpEndpoint ep{.base_url = srv.url(), .adapter = "ProblemSolution", .backoff_initial_s = 0.01};
    HttpBackend ok(ep);
    CHECK(ok.generate("hi", 0.5, 7) == "SOLUTION:\nok hi");
    CHECK(last["adapter"] == "ProblemSolution");
    CHECK(last["temperature"] == 0.5);
    CHECK(last["seed"] == 7);
    CHECK(hits == 1);

    auto expect_transport = [&](const std::string& path, double timeout, bool timed_out) {
        hits = 0;
        HttpEndpoint e = ep;
        e.path = path;
        e.timeout_s = timeout;
        try {
            (void)HttpBackend(e).generate("x", 0.1, std::nullopt);
            FAIL("expected TransportError");
        } catch (const TransportError& err) {
            CHECK(err.attempts() == 3);
            CHECK(err.timed_out() == timed_out);
        }
        CHECK(hits == 3);
    };
    expect_transport("/fail", 5.0, false);
    expect_transport("/bad", 5.0, false);
    expect_transport("/slow", 0.2, true);

    HttpEndpoint closed{.base_url = "http://127.0.0.1:1", .max_attempts = 2, .backoff_initial_s = 0.0};
    try {
        (void)HttpBackend(closed).generate("x", 0.1, std::nullopt);
        FAIL("expected TransportError");
    } catch (const TransportError& err) {
        CHECK(err.attempts() == 2);
    }
    CHECK_THROWS_AS(HttpBackend(HttpEndpoint{.max_attempts = 0}), ContractViolation);
}

TEST_CASE("config file and environment", "[config]") {
    const json j{{"v", 1},
                 {"backend", "http"},
                 {"forward", {{"base_url", "http://a:1"}}},
                 {"k", 6},
                 {"child_order", "retrieved_first"},
                 {"temperature", {{"base", 0.9}}},
                 {"service", {{"port", 9000}}}};
    const Config c = config_from_json(j);
    CHECK(c.backend == "http");
    CHECK(c.forward.base_url == "http://a:1");
    CHECK(c.forward.adapter == "ProblemSolution");
    CHECK(c.reverse.adapter == "SolutionProblem");
    CHECK(c.traversal.k == 6);
    CHECK(c.traversal.child_order == ChildOrder::RetrievedFirst);
    CHECK(c.base_temperature == 0.9);
    CHECK(c.burst_width == 0.1);
    CHECK(c.port == 9000);

    CHECK_THROWS_AS(config_from_json(json{{"backend", "http"}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json{{"v", 2}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json{{"v", 1}, {"colour", "red"}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json{{"v", 1}, {"k", "many"}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json{{"v", 1}, {"child_order", "sideways"}}), ParseError);

    const auto path = std::filesystem::temp_directory_path() / "ideaspace_config_test.json";
    std::ofstream(path) << j.dump();
    std::map<std::string, std::string> env{{"IDEASPACE_K", "3"}, {"IDEASPACE_BASE_TEMPERATURE", "0.4"}};
    auto lookup = [&](const std::string& n) -> std::optional<std::string> {
        auto it = env.find(n);
        if (it == env.end()) return std::nullopt;
        return it->second;
    };
    const Config r = resolve_config(path, lookup);
    CHECK(r.traversal.k == 3);  // env over file
    CHECK(r.base_temperature == 0.4);
    CHECK(r.port == 9000);  // file over default
    env["IDEASPACE_PORT"] = "eighty";
    CHECK_THROWS_AS(resolve_config(path, lookup), ParseError);
    env.erase("IDEASPACE_PORT");
    env["IDEASPACE_BACKEND"] = "magic";
    CHECK_THROWS_AS(resolve_config(path, lookup), ParseError);
    CHECK(resolve_config(std::nullopt, [](const std::string&) { return std::optional<std::string>{}; }).backend ==
          "synthetic");
}
