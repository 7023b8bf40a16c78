// Walks a random path through the problem space on the synthetic backend,
// printing each problem with the solution generated for it, then shows what
// one expansion returns.

#include <iostream>
#include <memory>

#include "ideaspace/synthetic.hpp"
#include "ideaspace/traversal.hpp"

using namespace ideaspace;

int main() {
    auto world = std::make_shared<SyntheticWorld>();
    auto store = std::make_shared<IdeaStore>(std::make_shared<SyntheticEmbedder>(world));
    for (auto& r : synthetic_records(*world, 313, 1)) store->insert(std::move(r));
    auto gen = make_synthetic_generator(world);

    TemperatureSchedule sched(0.7, 0.1, 1);
    Statement problem = Statement::problem("Retaining high-performing talent is hard in competitive emerging markets.");
    Rng pick(1);
    std::cout << "random walk, 5 steps\n";
    for (int step = 0; step < 5; ++step) {
        ExploreResult res = explore(problem, 4, *store, *gen, sched);
        std::cout << step << "  P: " << problem.text() << "\n   S: " << res.solution.statement.text() << '\n';
        std::vector<Statement> candidates{res.problem.statement};
        for (const auto& nb : res.related) candidates.push_back(nb.record.problem);
        problem = candidates[pick.below(candidates.size())];
    }

    ExplorationTree tree("demo", Statement::problem("It is difficult to plan investments in an uncertain economy."), {},
                         TemperatureSchedule(0.7, 0.1, 2));
    const auto children = tree.expand(tree.root_id(), *store, *gen);
    std::cout << "\nroot expansion: " << children.size() << " children\n";
    for (NodeId id : children) {
        const auto& n = tree.node(id);
        std::cout << (is_generated(n.origin) ? "  [generated] " : "  [retrieved] ") << n.problem.text() << '\n';
    }
    tree.validate();
    return 0;
}
