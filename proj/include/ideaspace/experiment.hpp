#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ideaspace/csv.hpp"
#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/random.hpp"
#include "ideaspace/semantic.hpp"
#include "ideaspace/traversal.hpp"

namespace ideaspace {

// ===========================================================================
// Predictor evaluation
// ===========================================================================

class Predictor {
public:
    virtual ~Predictor() = default;
    // Output role is the opposite of the input role.
    virtual Statement predict(Direction direction, const Statement& input) = 0;
};

// Looks up the ground-truth counterpart. Upper bound for the harness.
class IdentityEchoPredictor final : public Predictor {
public:
    explicit IdentityEchoPredictor(const std::vector<IdeaRecord>& pairs) {
        for (const auto& r : pairs) {
            to_solution_.emplace(r.problem.text(), r.solution.text());
            to_problem_.emplace(r.solution.text(), r.problem.text());
        }
    }

    Statement predict(Direction d, const Statement& input) override {
        const auto& table = d == Direction::ProblemToSolution ? to_solution_ : to_problem_;
        auto it = table.find(input.text());
        if (it == table.end()) throw NotFoundError("no ground truth for input");
        return Statement(it->second, output_role(d));
    }

private:
    std::unordered_map<std::string, std::string> to_solution_;
    std::unordered_map<std::string, std::string> to_problem_;
};

// Uniform draw of a training counterpart of the requested role.
class RandomPredictor final : public Predictor {
public:
    RandomPredictor(std::vector<IdeaRecord> train, std::uint64_t seed) : train_(std::move(train)), rng_(seed) {
        if (train_.empty()) throw DomainError("RandomPredictor needs a non-empty training set");
    }

    std::size_t draw_index() { return static_cast<std::size_t>(rng_.below(train_.size())); }

    Statement predict(Direction d, const Statement&) override {
        const IdeaRecord& r = train_[draw_index()];
        return d == Direction::ProblemToSolution ? r.solution : r.problem;
    }

private:
    std::vector<IdeaRecord> train_;
    Rng rng_;
};

// A generator direction at a fixed temperature (burst width 0).
class GeneratorPredictor final : public Predictor {
public:
    GeneratorPredictor(std::shared_ptr<const Generator> gen, double temperature, std::uint64_t seed)
        : gen_(std::move(gen)), sched_(temperature, 0.0, seed) {}

    Statement predict(Direction d, const Statement& input) override { return gen_->map(d, input, sched_).statement; }

private:
    std::shared_ptr<const Generator> gen_;
    TemperatureSchedule sched_;
};

struct EvalCell {
    std::string predictor;
    Direction direction;
    double similarity_mean = 0.0;
    double similarity_std = 0.0;
    double distance_mean = 0.0;
    double distance_std = 0.0;
    std::size_t n = 0;         // items that produced a prediction
    std::size_t failures = 0;  // items skipped
};

struct EvalTable {
    std::vector<EvalCell> cells;

    const EvalCell& at(const std::string& predictor, Direction d) const {
        for (const auto& c : cells) {
            if (c.predictor == predictor && c.direction == d) return c;
        }
        throw NotFoundError("no cell for " + predictor);
    }
};

struct NamedPredictor {
    std::string name;
    std::shared_ptr<Predictor> predictor;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}
}  // namespace detail

// For every (predictor, direction, test pair): predict the counterpart and
// score it against ground truth by embedding cosine similarity and
// normalized edit distance, then aggregate mean and population std.
inline EvalTable evaluate_predictors(const std::vector<NamedPredictor>& predictors,
                                     const std::vector<IdeaRecord>& test_pairs,
                                     const std::vector<Direction>& directions, const Embedder& embedder) {
    if (test_pairs.empty()) throw DomainError("evaluate_predictors: empty test set");
    EvalTable table;
    for (const auto& np : predictors) {
        for (Direction d : directions) {
            EvalCell cell{np.name, d};
            std::vector<double> sims, dists;
            for (const auto& pair : test_pairs) {
                const Statement& input = d == Direction::ProblemToSolution ? pair.problem : pair.solution;
                const Statement& truth = d == Direction::ProblemToSolution ? pair.solution : pair.problem;
                try {
                    const Statement pred = np.predictor->predict(d, input);
                    const double sim =
                        cosine_similarity(embedder.embed(truth.text()), embedder.embed(pred.text()));
                    sims.push_back(sim);
                    dists.push_back(normalized_edit_distance(truth.text(), pred.text()));
                } catch (const std::exception&) {
                    ++cell.failures;
                }
            }
            cell.n = sims.size();
            std::tie(cell.similarity_mean, cell.similarity_std) = detail::mean_std(sims);
            std::tie(cell.distance_mean, cell.distance_std) = detail::mean_std(dists);
            table.cells.push_back(cell);
        }
    }
    return table;
}

// ===========================================================================
// Temperature sweep
// ===========================================================================

inline const std::vector<std::string>& default_original_problems() {
    static const std::vector<std::string> problems = {
        "Software project timelines are often underestimated, which leads to high costs.",
        "It is difficult to measure employee satisfaction in an unbiased way.",
        "It is not easy for early startups to find a customer base willing to try new technology.",
        "Companies struggle with gaining insights from large volumes and high velocity of data.",
        "It is hard to track and measure customer satisfaction across large geographies.",
        "It is difficult to plan investments in an uncertain economy.",
        "It is difficult to create innovation opportunities without introducing too much process and hampering "
        "creativity.",
        "Retaining high-performing talent is hard in competitive emerging markets.",
        "Large machine learning models are expensive and time consuming to train.",
        "Ensuring privacy of customers is difficult while leveraging their data for business insights.",
    };
    return problems;
}

inline const std::vector<double>& default_sweep_levels() {
    static const std::vector<double> levels = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
    return levels;
}

struct SweepConfig {
    std::vector<double> levels = default_sweep_levels();
    std::size_t target_solutions = 100;
    TraversalOptions traversal{};
    TraversalPolicy policy = TraversalPolicy::depth_first();
    double burst_width = 0.1;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    bool generated_problems_only = false;  // else every collected problem
    bool pooled = false;                   // level summaries pool pairs instead of averaging trees
};

enum class StatementSet { Solution, Problem };
enum class Metric { EditDistance, CosineSimilarity };

inline constexpr std::string_view to_string(StatementSet s) noexcept {
    return s == StatementSet::Solution ? "solution" : "problem";
}
inline constexpr std::string_view to_string(Metric m) noexcept {
    return m == Metric::EditDistance ? "edit_distance" : "cosine_similarity";
}

struct NoveltyCell {
    std::size_t problem_index = 0;
    std::string problem;
    double level = 0.0;
    PairwiseStats solution_edit;
    PairwiseStats solution_cosine;
    PairwiseStats problem_edit;
    PairwiseStats problem_cosine;
    std::size_t n_solutions = 0;
    std::size_t n_problems = 0;
    bool truncated = false;
    std::optional<std::string> error;

    const PairwiseStats& stats(StatementSet s, Metric m) const {
        if (s == StatementSet::Solution) return m == Metric::EditDistance ? solution_edit : solution_cosine;
        return m == Metric::EditDistance ? problem_edit : problem_cosine;
    }
    PairwiseStats& stats(StatementSet s, Metric m) {
        return const_cast<PairwiseStats&>(std::as_const(*this).stats(s, m));
    }
};

struct LevelSummary {
    double level = 0.0;
    // Indexed by [set][metric]; mean across trees and std of the per-tree means
    // (or pooled mean/std in pooled mode).
    double mean[2][2] = {};
    double std[2][2] = {};
    std::size_t trees = 0;

    double get(StatementSet s, Metric m) const { return mean[static_cast<int>(s)][static_cast<int>(m)]; }
};

struct NoveltyReport {
    std::vector<NoveltyCell> cells;  // problem-major, then level
    std::vector<LevelSummary> levels;
    std::uint64_t generations = 0;        // sol + pro calls
    std::uint64_t neighbor_searches = 0;  // rel calls
};

inline constexpr StatementSet kSets[] = {StatementSet::Solution, StatementSet::Problem};
inline constexpr Metric kMetrics[] = {Metric::EditDistance, Metric::CosineSimilarity};

inline std::vector<LevelSummary> summarize_levels(const std::vector<NoveltyCell>& cells,
                                                  const std::vector<double>& levels, bool pooled) {
    std::vector<LevelSummary> out;
    for (double level : levels) {
        LevelSummary s{level};
        std::vector<const NoveltyCell*> ok;
        for (const auto& c : cells) {
            if (c.level == level && !c.error) ok.push_back(&c);
        }
        s.trees = ok.size();
        for (StatementSet set : kSets) {
            for (Metric m : kMetrics) {
                const int a = static_cast<int>(set), b = static_cast<int>(m);
                if (ok.empty()) {
                    s.mean[a][b] = s.std[a][b] = std::nan("");
                    continue;
                }
                if (pooled) {
                    double n = 0.0, sum = 0.0, sq = 0.0;
                    for (const auto* c : ok) {
                        const auto& st = c->stats(set, m);
                        const double w = static_cast<double>(st.pairs);
                        n += w;
                        sum += w * st.mean;
                        sq += w * (st.std * st.std + st.mean * st.mean);
                    }
                    const double mu = sum / n;
                    s.mean[a][b] = mu;
                    s.std[a][b] = std::sqrt(std::max(0.0, sq / n - mu * mu));
                } else {
                    std::vector<double> means;
                    for (const auto* c : ok) means.push_back(c->stats(set, m).mean);
                    std::tie(s.mean[a][b], s.std[a][b]) = detail::mean_std(means);
                }
            }
        }
        out.push_back(s);
    }
    return out;
}

// One exploration tree per (problem, level); pairwise novelty statistics
// are computed inside each tree and then averaged across trees per level.
// Each tree gets its own schedule seed derived from (seed, problem, level),
// so results do not depend on parallelism or scheduling.
inline NoveltyReport temperature_sweep(const std::vector<std::string>& problems, const SweepConfig& cfg,
                                       const IdeaStore& store, const Generator& gen) {
    if (!std::is_sorted(cfg.levels.begin(), cfg.levels.end())) {
        throw ContractViolation("sweep levels must be sorted ascending");
    }
    const std::size_t n_levels = cfg.levels.size();
    std::vector<NoveltyCell> cells(problems.size() * n_levels);
    std::vector<std::uint64_t> expansions(cells.size(), 0);
    const Embedder& embedder = store.embedder();

    auto run_cell = [&](std::size_t idx) {
        const std::size_t pi = idx / n_levels, li = idx % n_levels;
        NoveltyCell& cell = cells[idx];
        cell.problem_index = pi;
        cell.problem = problems[pi];
        cell.level = cfg.levels[li];
        try {
            TemperatureSchedule sched(cfg.levels[li], cfg.burst_width, mix_seed(mix_seed(cfg.seed, pi), li));
            const ExplorationTree tree =
                run_exploration(Statement::problem(problems[pi]), cfg.policy, cfg.target_solutions, cfg.traversal,
                                sched, store, gen, "sweep-p" + std::to_string(pi) + "-l" + std::to_string(li));
            expansions[idx] = tree.solutions_generated();
            cell.truncated = tree.truncated();
            Collected col = collect(tree);
            if (cfg.generated_problems_only) {
                col.problems.clear();
                for (const auto& [id, n] : tree.nodes()) {
                    if (is_generated(n.origin)) col.problems.push_back(n.problem);
                }
            }
            cell.n_solutions = col.solutions.size();
            cell.n_problems = col.problems.size();
            auto edit = [](const Statement& a, const Statement& b) {
                return normalized_edit_distance(a.text(), b.text());
            };
            auto cosine = [&](const Statement& a, const Statement& b) {
                return cosine_similarity(a.embedding(embedder), b.embedding(embedder));
            };
            cell.solution_edit = mean_pairwise(col.solutions, edit);
            cell.solution_cosine = mean_pairwise(col.solutions, cosine);
            cell.problem_edit = mean_pairwise(col.problems, edit);
            cell.problem_cosine = mean_pairwise(col.problems, cosine);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(cfg.parallelism, 1, std::max<std::size_t>(cells.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    NoveltyReport report;
    report.cells = std::move(cells);
    report.levels = summarize_levels(report.cells, cfg.levels, cfg.pooled);
    for (std::uint64_t e : expansions) {
        report.generations += 2 * e;
        if (cfg.traversal.k > 0) report.neighbor_searches += e;
    }
    return report;
}

// ----- CSV export -----------------------------------------------------------

inline constexpr std::string_view kCellsSchema = "# ideaspace novelty_cells v1";
inline constexpr std::string_view kLevelsSchema = "# ideaspace novelty_levels v1";
inline constexpr std::string_view kCellsHeader = "problem_index,level,set,metric,mean,std,pairs,count,truncated,problem";
inline constexpr std::string_view kLevelsHeader = "level,set,metric,mean,std,trees";

struct ReportFiles {
    std::filesystem::path cells;
    std::filesystem::path levels;
};

// Writes novelty_cells.csv (one row per problem x level x set x metric;
// failed trees are omitted) and novelty_levels.csv (plot-ready per-level
// averages, long format).
inline ReportFiles export_report(const NoveltyReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    ReportFiles files{dir / "novelty_cells.csv", dir / "novelty_levels.csv"};

    std::ofstream cells(files.cells, std::ios::binary | std::ios::trunc);
    if (!cells) throw IoError("cannot write " + files.cells.string());
    cells << kCellsSchema << '\n' << kCellsHeader << '\n';
    for (const auto& c : report.cells) {
        if (c.error) continue;
        for (StatementSet set : kSets) {
            for (Metric m : kMetrics) {
                const auto& st = c.stats(set, m);
                const std::size_t count = set == StatementSet::Solution ? c.n_solutions : c.n_problems;
                cells << csv::join({std::to_string(c.problem_index), csv::number(c.level), std::string(to_string(set)),
                                    std::string(to_string(m)), csv::number(st.mean), csv::number(st.std),
                                    std::to_string(st.pairs), std::to_string(count), c.truncated ? "1" : "0",
                                    c.problem})
                      << '\n';
            }
        }
    }
    if (!cells) throw IoError("write failed: " + files.cells.string());

    std::ofstream levels(files.levels, std::ios::binary | std::ios::trunc);
    if (!levels) throw IoError("cannot write " + files.levels.string());
    levels << kLevelsSchema << '\n' << kLevelsHeader << '\n';
    for (const auto& l : report.levels) {
        for (StatementSet set : kSets) {
            for (Metric m : kMetrics) {
                const int a = static_cast<int>(set), b = static_cast<int>(m);
                levels << csv::join({csv::number(l.level), std::string(to_string(set)), std::string(to_string(m)),
                                     csv::number(l.mean[a][b]), csv::number(l.std[a][b]), std::to_string(l.trees)})
                       << '\n';
            }
        }
    }
    if (!levels) throw IoError("write failed: " + files.levels.string());
    return files;
}

// Reads novelty_cells.csv back into cells (problem-major, level order as in
// the file).
inline std::vector<NoveltyCell> import_cells(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string first;
    std::getline(in, first);
    if (first != kCellsSchema) throw ParseError("unexpected schema line: " + first, 1);
    std::string header;
    std::getline(in, header);
    if (header != kCellsHeader) throw ParseError("unexpected header", 2);

    std::vector<NoveltyCell> out;
    std::map<std::pair<std::size_t, double>, std::size_t> where;
    std::vector<std::string> f;
    std::size_t line = 3;
    while (csv::read_record(in, f, line)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 10) throw ParseError("expected 10 fields", line);
        const std::size_t pi = static_cast<std::size_t>(csv::parse_number(f[0], line));
        const double level = csv::parse_number(f[1], line);
        auto [it, fresh] = where.try_emplace({pi, level}, out.size());
        if (fresh) {
            NoveltyCell c;
            c.problem_index = pi;
            c.level = level;
            c.problem = f[9];
            c.truncated = f[8] == "1";
            out.push_back(std::move(c));
        }
        NoveltyCell& c = out[it->second];
        const StatementSet set = f[2] == "solution" ? StatementSet::Solution : StatementSet::Problem;
        const Metric m = f[3] == "edit_distance" ? Metric::EditDistance : Metric::CosineSimilarity;
        auto& st = c.stats(set, m);
        st.mean = csv::parse_number(f[4], line);
        st.std = csv::parse_number(f[5], line);
        st.pairs = static_cast<std::size_t>(csv::parse_number(f[6], line));
        const auto count = static_cast<std::size_t>(csv::parse_number(f[7], line));
        (set == StatementSet::Solution ? c.n_solutions : c.n_problems) = count;
    }
    return out;
}

}  // namespace ideaspace
