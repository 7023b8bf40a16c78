// ideaspace command-line front end: explore, sweep, build-dataset, evaluate, serve.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "ideaspace/config.hpp"
#include "ideaspace/dataset.hpp"
#include "ideaspace/experiment.hpp"
#include "ideaspace/http_backend.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/service.hpp"
#include "ideaspace/synthetic.hpp"
#include "ideaspace/traversal.hpp"

namespace fs = std::filesystem;
using namespace ideaspace;

namespace {

struct Common {
    std::optional<std::string> config_path;
    std::optional<std::string> backend;
    std::optional<std::string> store_path;
    std::optional<std::size_t> store_size;
    std::optional<std::size_t> k;
    std::optional<int> max_depth;
    std::optional<double> base_temperature;
    std::optional<double> burst_width;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON config file (\"v\": 1)");
    cmd->add_option("--backend", c.backend, "synthetic or http")->check(CLI::IsMember({"synthetic", "http"}));
    cmd->add_option("--store", c.store_path, "idea store JSONL (default: generated synthetic store)");
    cmd->add_option("--store-size", c.store_size, "records in the generated synthetic store");
    cmd->add_option("--k", c.k, "related problems per expansion");
    cmd->add_option("--max-depth", c.max_depth, "maximum tree depth")->check(CLI::PositiveNumber);
    cmd->add_option("--base-temperature", c.base_temperature, "schedule base temperature");
    cmd->add_option("--burst-width", c.burst_width, "temperature burst interval width");
}

// Config file, then environment, then flags.
Config resolve(const Common& c) {
    Config cfg = resolve_config(c.config_path ? std::optional<fs::path>(*c.config_path) : std::nullopt);
    if (c.backend) cfg.backend = *c.backend;
    if (c.store_path) cfg.store_path = *c.store_path;
    if (c.store_size) cfg.synthetic_store_size = *c.store_size;
    if (c.k) cfg.traversal.k = *c.k;
    if (c.max_depth) cfg.traversal.max_depth = *c.max_depth;
    if (c.base_temperature) cfg.base_temperature = *c.base_temperature;
    if (c.burst_width) cfg.burst_width = *c.burst_width;
    return cfg;
}

struct Runtime {
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<IdeaStore> store;
    std::shared_ptr<Generator> generator;
};

Runtime make_runtime(const Config& cfg) {
    Runtime rt;
    std::shared_ptr<const SyntheticWorld> world;
    if (cfg.backend == "synthetic") {
        world = std::make_shared<SyntheticWorld>();
        rt.embedder = std::make_shared<SyntheticEmbedder>(world);
        rt.generator = make_synthetic_generator(world, cfg.templates);
    } else {
        rt.embedder = std::make_shared<HashingEmbedder>();
        rt.generator = std::make_shared<Generator>(std::make_shared<HttpBackend>(cfg.forward),
                                                   std::make_shared<HttpBackend>(cfg.reverse), cfg.templates);
    }
    if (!cfg.store_path.empty()) {
        rt.store = std::make_shared<IdeaStore>(IdeaStore::load_jsonl(cfg.store_path, rt.embedder));
    } else {
        if (!world) throw ContractViolation("the http backend needs --store (no synthetic store to fall back on)");
        rt.store = std::make_shared<IdeaStore>(rt.embedder);
        for (auto& r : synthetic_records(*world, cfg.synthetic_store_size, cfg.synthetic_store_seed)) {
            rt.store->insert(std::move(r));
        }
    }
    return rt;
}

std::string one_line(std::string s) {
    for (char& ch : s) {
        if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

std::vector<double> parse_levels(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) out.push_back(csv::parse_number(trim(item), ++i));
    if (out.empty()) throw ParseError("--levels is empty", 0);
    return out;
}

TraversalPolicy parse_policy(const std::string& name, std::uint64_t seed) {
    if (name == "random") return TraversalPolicy::random(seed);
    if (name == "bfs") return TraversalPolicy::breadth_first();
    return TraversalPolicy::depth_first();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Problem/solution space exploration"};
    app.require_subcommand(1);

    // explore
    Common ex_common;
    std::string ex_problem, ex_policy = "random";
    std::size_t ex_steps = 10;
    std::uint64_t ex_seed = 0;
    std::optional<std::string> ex_tree_out;
    auto* explore_cmd = app.add_subcommand("explore", "one-shot exploration; prints problem<TAB>solution per step");
    add_common(explore_cmd, ex_common);
    explore_cmd->add_option("--problem", ex_problem, "root problem statement")->required();
    explore_cmd->add_option("--steps", ex_steps, "number of expansions")->check(CLI::PositiveNumber);
    explore_cmd->add_option("--policy", ex_policy, "random, dfs or bfs")->check(CLI::IsMember({"random", "dfs", "bfs"}));
    explore_cmd->add_option("--seed", ex_seed, "schedule and policy seed");
    explore_cmd->add_option("--tree-json", ex_tree_out, "write the tree JSON here");

    // sweep
    Common sw_common;
    std::string sw_levels = "0.5,0.6,0.7,0.8,0.9,1.0,1.1";
    std::size_t sw_target = 100, sw_parallel = 1;
    std::uint64_t sw_seed = 0;
    std::string sw_report = "report";
    std::optional<std::string> sw_problems;
    bool sw_pooled = false, sw_generated_only = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "temperature sweep; writes novelty CSVs");
    add_common(sweep_cmd, sw_common);
    sweep_cmd->add_option("--levels", sw_levels, "comma-separated ascending temperature levels");
    sweep_cmd->add_option("--target", sw_target, "solutions per tree")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--seed", sw_seed, "sweep seed");
    sweep_cmd->add_option("--report-dir", sw_report, "output directory");
    sweep_cmd->add_option("--problems", sw_problems, "original problems, one per line (default: built-in ten)");
    sweep_cmd->add_option("--parallelism", sw_parallel, "concurrent trees")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--pooled", sw_pooled, "pool pairs across trees instead of averaging tree means");
    sweep_cmd->add_flag("--generated-only", sw_generated_only, "problem statistics over generated problems only");

    // build-dataset
    Common bd_common;
    std::string bd_companies, bd_out = "ideas.jsonl", bd_rejections = "rejections.csv";
    std::optional<std::string> bd_responses;
    std::size_t bd_parallel = 1;
    std::uint64_t bd_seed = 0;
    auto* build_cmd = app.add_subcommand("build-dataset", "extract problem/solution pairs per company");
    add_common(build_cmd, bd_common);
    build_cmd->add_option("--companies", bd_companies, "company list, one per line")->required();
    build_cmd->add_option("--responses", bd_responses, "canned responses JSONL (otherwise the http forward endpoint)");
    build_cmd->add_option("--out", bd_out, "accepted records JSONL");
    build_cmd->add_option("--rejections", bd_rejections, "rejections CSV");
    build_cmd->add_option("--parallelism", bd_parallel, "concurrent requests")->check(CLI::PositiveNumber);
    build_cmd->add_option("--seed", bd_seed, "generation seed");

    // evaluate
    Common ev_common;
    std::string ev_records;
    std::size_t ev_test = 10;
    std::uint64_t ev_seed = 0;
    double ev_temperature = 0.1;
    auto* eval_cmd = app.add_subcommand("evaluate", "predictor similarity/distance table on a held-out split");
    add_common(eval_cmd, ev_common);
    eval_cmd->add_option("--records", ev_records, "records JSONL (default: the configured store)");
    eval_cmd->add_option("--test-count", ev_test, "held-out pairs");
    eval_cmd->add_option("--seed", ev_seed, "split and predictor seed");
    eval_cmd->add_option("--temperature", ev_temperature, "generator predictor temperature");

    // serve
    Common sv_common;
    std::optional<std::string> sv_host;
    std::optional<int> sv_port;
    auto* serve_cmd = app.add_subcommand("serve", "run the REST service");
    add_common(serve_cmd, sv_common);
    serve_cmd->add_option("--host", sv_host, "bind address");
    serve_cmd->add_option("--port", sv_port, "port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    }

    try {
        if (*explore_cmd) {
            const Config cfg = resolve(ex_common);
            const Runtime rt = make_runtime(cfg);
            TemperatureSchedule sched(cfg.base_temperature, cfg.burst_width, ex_seed);
            const ExplorationTree tree = run_exploration(Statement::problem(ex_problem), parse_policy(ex_policy, ex_seed),
                                                         ex_steps, cfg.traversal, sched, *rt.store, *rt.generator,
                                                         "explore-" + std::to_string(ex_seed));
            for (NodeId id : tree.expansion_order()) {
                const auto& n = tree.node(id);
                std::cout << one_line(n.problem.text()) << '\t' << one_line(n.generated_solution->text()) << '\n';
            }
            if (tree.truncated()) std::cerr << "note: tree exhausted after " << tree.solutions_generated() << " steps\n";
            if (ex_tree_out) {
                std::ofstream out(*ex_tree_out, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot write " + *ex_tree_out);
                out << tree.to_json().dump(2) << '\n';
            }
            return 0;
        }
        if (*sweep_cmd) {
            const Config cfg = resolve(sw_common);
            const Runtime rt = make_runtime(cfg);
            SweepConfig sc;
            sc.levels = parse_levels(sw_levels);
            sc.target_solutions = sw_target;
            sc.traversal = cfg.traversal;
            sc.burst_width = cfg.burst_width;
            sc.seed = sw_seed;
            sc.parallelism = sw_parallel;
            sc.pooled = sw_pooled;
            sc.generated_problems_only = sw_generated_only;
            const std::vector<std::string> problems = sw_problems ? read_lines(*sw_problems) : default_original_problems();
            const NoveltyReport report = temperature_sweep(problems, sc, *rt.store, *rt.generator);
            const ReportFiles files = export_report(report, sw_report);
            std::size_t failed = 0;
            for (const auto& c : report.cells) {
                if (c.error) {
                    ++failed;
                    std::cerr << "tree failed (problem " << c.problem_index << ", level " << c.level << "): " << *c.error
                              << '\n';
                }
            }
            std::cout << "cells: " << report.cells.size() << " (" << failed << " failed)\n"
                      << "generations: " << report.generations << ", neighbor searches: " << report.neighbor_searches
                      << "\n" << "wrote " << files.cells.string() << " and " << files.levels.string() << '\n';
            return failed == report.cells.size() && failed > 0 ? 1 : 0;
        }
        if (*build_cmd) {
            const Config cfg = resolve(bd_common);
            std::shared_ptr<const GeneratorBackend> backend;
            if (bd_responses) {
                backend = std::make_shared<CannedBackend>(CannedBackend::from_jsonl(*bd_responses));
            } else {
                backend = std::make_shared<HttpBackend>(cfg.forward);
            }
            BuildOptions bo;
            bo.parallelism = bd_parallel;
            bo.seed = bd_seed;
            const DatasetBuild built = build_dataset(read_lines(bd_companies), *backend, bo);
            write_records_jsonl(built.records, bd_out);
            write_rejections_csv(built.rejected, bd_rejections);
            std::cout << "accepted: " << built.records.size() << ", rejected: " << built.rejected.size() << '\n';
            return 0;
        }
        if (*eval_cmd) {
            const Config cfg = resolve(ev_common);
            const Runtime rt = make_runtime(cfg);
            std::vector<IdeaRecord> records =
                ev_records.empty() ? rt.store->records() : IdeaStore::load_jsonl(ev_records, rt.embedder).records();
            const Split sp = split(records, SplitSpec{ev_test, std::nullopt, ev_seed});
            std::vector<NamedPredictor> preds{
                {"identity", std::make_shared<IdentityEchoPredictor>(records)},
                {"random", std::make_shared<RandomPredictor>(sp.train, ev_seed)},
                {"generator", std::make_shared<GeneratorPredictor>(rt.generator, ev_temperature, ev_seed)},
            };
            const EvalTable table = evaluate_predictors(
                preds, sp.test, {Direction::ProblemToSolution, Direction::SolutionToProblem}, *rt.embedder);
            std::printf("%-10s %-20s %-17s %-17s %s\n", "predictor", "direction", "similarity", "distance", "n");
            for (const auto& c : table.cells) {
                std::printf("%-10s %-20s %.3f +- %.3f    %.3f +- %.3f    %zu\n", c.predictor.c_str(),
                            std::string(to_string(c.direction)).c_str(), c.similarity_mean, c.similarity_std,
                            c.distance_mean, c.distance_std, c.n);
            }
            return 0;
        }
        if (*serve_cmd) {
            Config cfg = resolve(sv_common);
            if (sv_host) cfg.host = *sv_host;
            if (sv_port) cfg.port = *sv_port;
            const Runtime rt = make_runtime(cfg);
            ServiceOptions so;
            so.traversal = cfg.traversal;
            so.base_temperature = cfg.base_temperature;
            so.burst_width = cfg.burst_width;
            so.session_ttl_s = cfg.session_ttl_s;
            so.max_in_flight = cfg.max_in_flight;
            ExplorationService service(rt.store, rt.generator, so);
            httplib::Server server;
            service.bind(server);
            std::cerr << "listening on " << cfg.host << ':' << cfg.port << " (" << rt.store->size() << " records)\n";
            return server.listen(cfg.host, cfg.port) ? 0 : 1;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
