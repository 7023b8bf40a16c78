#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/random.hpp"
#include "ideaspace/semantic.hpp"

namespace ideaspace {

using NodeId = std::uint64_t;

struct RootOrigin {};
struct RetrievedOrigin {
    std::string record_id;
    std::size_t rank;
};
struct GeneratedOrigin {
    NodeId parent;
};
using Origin = std::variant<RootOrigin, RetrievedOrigin, GeneratedOrigin>;

inline bool is_generated(const Origin& o) { return std::holds_alternative<GeneratedOrigin>(o); }
inline bool is_retrieved(const Origin& o) { return std::holds_alternative<RetrievedOrigin>(o); }

struct ExplorationNode {
    NodeId id = 0;
    std::optional<NodeId> parent;
    Statement problem;
    Origin origin;
    int depth = 0;
    std::vector<NodeId> children;
    bool expanded = false;
    std::optional<Statement> generated_solution;  // present iff expanded
    std::optional<double> temperature_used;       // temperature of the sol() call
};

inline nlohmann::json node_to_json(const ExplorationNode& n) {
    using nlohmann::json;
    json origin;
    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, RootOrigin>) {
                origin = {{"type", "root"}};
            } else if constexpr (std::is_same_v<T, RetrievedOrigin>) {
                origin = {{"type", "retrieved"}, {"record_id", o.record_id}, {"rank", o.rank}};
            } else {
                origin = {{"type", "generated"}};
            }
        },
        n.origin);
    json j{{"node_id", n.id},
           {"parent", n.parent ? json(*n.parent) : json(nullptr)},
           {"depth", n.depth},
           {"origin", std::move(origin)},
           {"problem_text", n.problem.text()},
           {"expanded", n.expanded}};
    if (n.generated_solution) j["solution_text"] = n.generated_solution->text();
    if (n.temperature_used) j["temperature_used"] = *n.temperature_used;
    return j;
}

enum class ChildOrder { GeneratedFirst, RetrievedFirst };

struct TraversalOptions {
    std::size_t k = 4;
    int max_depth = 6;
    bool visited_cache = true;
    ChildOrder child_order = ChildOrder::GeneratedFirst;
};

struct ExploreResult {
    GenOutcome solution;        // sol(p)
    GenOutcome problem;         // pro(sol(p))
    std::vector<Neighbor> related;  // rel(p, k)
};

// One expansion step: sol(p), pro(sol(p)) and rel(p, k). Either the whole
// result is returned or nothing changes, including the schedule state.
inline ExploreResult explore(const Statement& p, std::size_t k, const IdeaStore& store, const Generator& gen,
                             TemperatureSchedule& sched, const std::set<std::string>& exclude = {}) {
    if (p.role() != Role::Problem) throw ContractViolation("explore expects a problem statement");
    TemperatureSchedule local = sched;
    auto related = store.rel(p, k, exclude);
    GenOutcome s = gen.sol(p, local);
    GenOutcome q = gen.pro(s.statement, local);
    sched = local;
    return ExploreResult{std::move(s), std::move(q), std::move(related)};
}

struct RegenerateResult {
    std::vector<NodeId> removed;
    std::vector<NodeId> added;
};

class ExplorationTree {
public:
    ExplorationTree(std::string tree_id, Statement root, TraversalOptions options, TemperatureSchedule schedule)
        : tree_id_(std::move(tree_id)), options_(options), schedule_(schedule) {
        if (root.role() != Role::Problem) throw ContractViolation("tree root must be a problem statement");
        if (options_.max_depth < 1) throw ContractViolation("max_depth must be positive");
        add_node(std::nullopt, std::move(root), RootOrigin{}, 0);
    }

    const std::string& tree_id() const noexcept { return tree_id_; }
    const TraversalOptions& options() const noexcept { return options_; }
    const TemperatureSchedule& schedule() const noexcept { return schedule_; }
    TemperatureSchedule& schedule() noexcept { return schedule_; }
    NodeId root_id() const noexcept { return 0; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t solutions_generated() const noexcept { return solutions_generated_; }
    bool truncated() const noexcept { return truncated_; }
    void set_truncated(bool t) noexcept { truncated_ = t; }
    const std::set<std::string>& visited_record_ids() const noexcept { return visited_; }
    const std::vector<NodeId>& expansion_order() const noexcept { return expansion_order_; }
    const std::map<NodeId, ExplorationNode>& nodes() const noexcept { return nodes_; }

    bool contains(NodeId id) const { return nodes_.count(id) != 0; }

    const ExplorationNode& node(NodeId id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw NotFoundError("unknown node " + std::to_string(id));
        return it->second;
    }

    bool expandable(NodeId id) const {
        auto it = nodes_.find(id);
        return it != nodes_.end() && !it->second.expanded && it->second.depth < options_.max_depth;
    }

    // Runs explore() on the node's problem and attaches one generated child
    // and up to k retrieved children. Returns the new node ids in child order.
    std::vector<NodeId> expand(NodeId id, const IdeaStore& store, const Generator& gen) {
        const ExplorationNode& n = node(id);
        if (n.expanded) throw StateError("node " + std::to_string(id) + " is already expanded");
        if (n.depth >= options_.max_depth) {
            throw DepthError("node " + std::to_string(id) + " is at the depth limit (" +
                             std::to_string(options_.max_depth) + ")");
        }
        static const std::set<std::string> kNone;
        ExploreResult r = explore(n.problem, options_.k, store, gen, schedule_,
                                  options_.visited_cache ? visited_ : kNone);
        return attach(id, std::move(r));
    }

    // Drops the node's children (with their subtrees) and its generated
    // solution, then expands it again. A pinned seed restarts the schedule
    // so the same seed reproduces the same regeneration.
    RegenerateResult regenerate(NodeId id, const IdeaStore& store, const Generator& gen,
                                std::optional<std::uint64_t> seed = std::nullopt) {
        const ExplorationNode& n = node(id);
        if (!n.expanded) throw StateError("node " + std::to_string(id) + " has not been expanded");

        TemperatureSchedule sched = schedule_;
        if (seed) sched.reseed(*seed);
        static const std::set<std::string> kNone;
        ExploreResult r = explore(n.problem, options_.k, store, gen, sched, options_.visited_cache ? visited_ : kNone);
        schedule_ = sched;

        RegenerateResult out;
        for (NodeId child : std::vector<NodeId>(n.children)) remove_subtree(child, out.removed);
        ExplorationNode& m = nodes_.at(id);
        m.children.clear();
        m.expanded = false;
        m.generated_solution.reset();
        m.temperature_used.reset();
        --solutions_generated_;
        expansion_order_.erase(std::remove(expansion_order_.begin(), expansion_order_.end(), id),
                               expansion_order_.end());
        out.added = attach(id, std::move(r));
        return out;
    }

    // Throws StateError describing the first violated structural invariant.
    void validate() const {
        auto fail = [](const std::string& what) { throw StateError("tree invariant violated: " + what); };
        std::size_t roots = 0, expanded = 0;
        std::map<std::string, std::size_t> retrieved_counts;
        for (const auto& [id, n] : nodes_) {
            if (n.id != id) fail("node id mismatch");
            if (n.depth > options_.max_depth) fail("node " + std::to_string(id) + " deeper than max_depth");
            if (n.expanded != n.generated_solution.has_value()) fail("generated_solution iff expanded");
            if (n.expanded) ++expanded;
            if (!n.parent) {
                ++roots;
                if (n.depth != 0 || !std::holds_alternative<RootOrigin>(n.origin)) fail("bad root");
            } else {
                auto p = nodes_.find(*n.parent);
                if (p == nodes_.end()) fail("dangling parent");
                if (n.depth != p->second.depth + 1) fail("depth arithmetic at node " + std::to_string(id));
                if (std::find(p->second.children.begin(), p->second.children.end(), id) == p->second.children.end()) {
                    fail("parent does not list child");
                }
                if (!p->second.expanded) fail("child of unexpanded node");
                if (const auto* g = std::get_if<GeneratedOrigin>(&n.origin); g && g->parent != *n.parent) {
                    fail("generated origin parent mismatch");
                }
            }
            for (NodeId c : n.children) {
                auto ch = nodes_.find(c);
                if (ch == nodes_.end() || ch->second.parent != id) fail("child link broken");
            }
            if (const auto* r = std::get_if<RetrievedOrigin>(&n.origin)) ++retrieved_counts[r->record_id];
            // Acyclic: the parent chain reaches the root within size() steps.
            std::size_t steps = 0;
            std::optional<NodeId> cur = n.parent;
            while (cur) {
                if (++steps > nodes_.size()) fail("cycle");
                cur = nodes_.at(*cur).parent;
            }
        }
        if (roots != 1) fail("exactly one root");
        if (expanded != solutions_generated_) fail("solutions_generated counter");
        if (expansion_order_.size() != solutions_generated_) fail("expansion order length");
        if (options_.visited_cache) {
            for (const auto& [rid, c] : retrieved_counts) {
                if (c > 1) fail("record " + rid + " retrieved twice");
            }
        }
    }

    // Stable JSON export, version 1.
    nlohmann::json to_json() const {
        using nlohmann::json;
        json nodes = json::array();
        for (const auto& [id, n] : nodes_) nodes.push_back(node_to_json(n));
        return json{{"v", 1},
                    {"tree_id", tree_id_},
                    {"k", options_.k},
                    {"max_depth", options_.max_depth},
                    {"schedule",
                     {{"base", schedule_.base()}, {"burst_width", schedule_.burst_width()}, {"seed", schedule_.seed()}}},
                    {"truncated", truncated_},
                    {"nodes", std::move(nodes)}};
    }

private:
    NodeId add_node(std::optional<NodeId> parent, Statement problem, Origin origin, int depth) {
        const NodeId id = next_id_++;
        nodes_.emplace(id, ExplorationNode{id, parent, std::move(problem), std::move(origin), depth, {}, false,
                                           std::nullopt, std::nullopt});
        if (parent) nodes_.at(*parent).children.push_back(id);
        return id;
    }

    std::vector<NodeId> attach(NodeId id, ExploreResult r) {
        const int depth = nodes_.at(id).depth + 1;
        std::vector<NodeId> added;
        auto add_generated = [&] {
            added.push_back(add_node(id, r.problem.statement, GeneratedOrigin{id}, depth));
        };
        auto add_retrieved = [&] {
            for (const auto& nb : r.related) {
                visited_.insert(nb.record.id);
                added.push_back(add_node(id, nb.record.problem, RetrievedOrigin{nb.record.id, nb.rank}, depth));
            }
        };
        if (options_.child_order == ChildOrder::GeneratedFirst) {
            add_generated();
            add_retrieved();
        } else {
            add_retrieved();
            add_generated();
        }
        ExplorationNode& n = nodes_.at(id);
        n.expanded = true;
        n.generated_solution = r.solution.statement;
        n.temperature_used = r.solution.temperature_used;
        ++solutions_generated_;
        expansion_order_.push_back(id);
        return added;
    }

    void remove_subtree(NodeId id, std::vector<NodeId>& removed) {
        const ExplorationNode& n = nodes_.at(id);
        for (NodeId c : std::vector<NodeId>(n.children)) remove_subtree(c, removed);
        if (n.expanded) {
            --solutions_generated_;
            expansion_order_.erase(std::remove(expansion_order_.begin(), expansion_order_.end(), id),
                                   expansion_order_.end());
        }
        removed.push_back(id);
        nodes_.erase(id);
    }

    std::string tree_id_;
    TraversalOptions options_;
    TemperatureSchedule schedule_;
    std::map<NodeId, ExplorationNode> nodes_;
    NodeId next_id_ = 0;
    std::set<std::string> visited_;
    std::size_t solutions_generated_ = 0;
    std::vector<NodeId> expansion_order_;
    bool truncated_ = false;
};

// ---------------------------------------------------------------------------
// Automated traversal
// ---------------------------------------------------------------------------

struct TraversalPolicy {
    enum class Kind { DepthFirst, BreadthFirst, Random };
    Kind kind = Kind::DepthFirst;
    std::uint64_t seed = 0;  // Random only

    static TraversalPolicy depth_first() { return {Kind::DepthFirst, 0}; }
    static TraversalPolicy breadth_first() { return {Kind::BreadthFirst, 0}; }
    static TraversalPolicy random(std::uint64_t seed) { return {Kind::Random, seed}; }
};

// Expands nodes in policy order until `target_solutions` expansions have
// happened or nothing expandable remains (then the tree is marked truncated).
//
//  - DepthFirst: LIFO over new children, so the first child in child order
//    is explored first and the deepest recent node is always next.
//  - BreadthFirst: FIFO, shallowest first.
//  - Random: uniform among the expandable children of the last expansion;
//    when there are none, uniform over every expandable node (backtrack).
inline ExplorationTree run_exploration(const Statement& root_problem, TraversalPolicy policy,
                                       std::size_t target_solutions, TraversalOptions options,
                                       TemperatureSchedule schedule, const IdeaStore& store, const Generator& gen,
                                       std::string tree_id = "tree") {
    if (target_solutions < 1) throw ContractViolation("target_solutions must be >= 1");
    ExplorationTree tree(std::move(tree_id), root_problem, options, std::move(schedule));

    std::deque<NodeId> frontier{tree.root_id()};
    Rng pick(policy.seed);
    std::vector<NodeId> last_children;
    bool first = true;

    auto next_node = [&]() -> std::optional<NodeId> {
        switch (policy.kind) {
            case TraversalPolicy::Kind::DepthFirst:
                while (!frontier.empty()) {
                    const NodeId id = frontier.back();
                    frontier.pop_back();
                    if (tree.expandable(id)) return id;
                }
                return std::nullopt;
            case TraversalPolicy::Kind::BreadthFirst:
                while (!frontier.empty()) {
                    const NodeId id = frontier.front();
                    frontier.pop_front();
                    if (tree.expandable(id)) return id;
                }
                return std::nullopt;
            case TraversalPolicy::Kind::Random: {
                if (first) return tree.root_id();
                std::vector<NodeId> candidates;
                for (NodeId c : last_children) {
                    if (tree.expandable(c)) candidates.push_back(c);
                }
                if (candidates.empty()) {
                    for (const auto& [id, n] : tree.nodes()) {
                        if (tree.expandable(id)) candidates.push_back(id);
                    }
                }
                if (candidates.empty()) return std::nullopt;
                return candidates[pick.below(candidates.size())];
            }
        }
        return std::nullopt;
    };

    while (tree.solutions_generated() < target_solutions) {
        const auto id = next_node();
        if (!id) {
            tree.set_truncated(true);
            break;
        }
        first = false;
        last_children = tree.expand(*id, store, gen);
        if (policy.kind == TraversalPolicy::Kind::DepthFirst) {
            frontier.insert(frontier.end(), last_children.rbegin(), last_children.rend());
        } else if (policy.kind == TraversalPolicy::Kind::BreadthFirst) {
            frontier.insert(frontier.end(), last_children.begin(), last_children.end());
        }
    }
    return tree;
}

struct Collected {
    std::vector<Statement> solutions;  // expansion order
    std::vector<Statement> problems;   // node insertion order, root first
};

inline Collected collect(const ExplorationTree& tree) {
    Collected c;
    for (NodeId id : tree.expansion_order()) c.solutions.push_back(*tree.node(id).generated_solution);
    for (const auto& [id, n] : tree.nodes()) c.problems.push_back(n.problem);
    return c;
}

}  // namespace ideaspace
