#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "blockevo/cfg.hpp"
#include "blockevo/distance.hpp"
#include "blockevo/vm.hpp"

namespace blockevo {

struct MissingRecord : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One statement-coverage objective: the block plus its control-dependence
// chain, nearest controlling branch first. Chains end at an artificial
// event node (or run out at unreachable code).
struct FitnessTarget {
    BlockId blockId = 0;
    std::vector<ControlDep> dependenceChain;
};

struct FitnessValue {
    double raw = 0;      // approach level + normalized branch distance
    bool covered = false;
};

struct ApproachResult {
    int level = 0;
    std::optional<ControlDep> criticalBranch;
};

namespace detail {

// Chains prefer the shortest route to a user-input event node. Internal
// event nodes (receive / start-as-clone) are walked through, so covering a
// receiver first requires reaching its broadcaster.
class ChainBuilder {
public:
    ChainBuilder(const Cfg& cfg, const ControlDependence& cd)
        : cfg_(cfg), cd_(cd) {}

    std::vector<ControlDep> chainFor(BlockId node) {
        std::vector<ControlDep> chain;
        std::set<BlockId> onPath{node};
        BlockId cur = node;
        while (true) {
            if (cfg_.userEventNodes.count(cur) && cur != node) break;
            auto it = cd_.find(cur);
            if (it == cd_.end() || it->second.empty()) break;
            const ControlDep* best = nullptr;
            size_t bestLen = SIZE_MAX;
            for (const auto& dep : it->second) {
                if (onPath.count(dep.branch)) continue;
                size_t len = depthOf(dep.branch, onPath);
                if (len < bestLen) { bestLen = len; best = &dep; }
            }
            if (!best) break;
            chain.push_back(*best);
            onPath.insert(best->branch);
            cur = best->branch;
        }
        return chain;
    }

private:
    // Depth to a user-input event node, memoised; cycles count as dead ends.
    size_t depthOf(BlockId node, const std::set<BlockId>& onPath) {
        if (cfg_.userEventNodes.count(node)) return 0;
        auto memo = depth_.find(node);
        if (memo != depth_.end()) return memo->second;
        auto it = cd_.find(node);
        size_t best = SIZE_MAX - 1;
        if (it != cd_.end()) {
            for (const auto& dep : it->second) {
                if (onPath.count(dep.branch)) continue;
                std::set<BlockId> next = onPath;
                next.insert(dep.branch);
                size_t d = depthOf(dep.branch, next);
                if (d != SIZE_MAX - 1 && d + 1 < best) best = d + 1;
            }
        }
        depth_[node] = best;
        return best;
    }

    const Cfg& cfg_;
    const ControlDependence& cd_;
    std::map<BlockId, size_t> depth_;
};

} // namespace detail

// One target per reachable program block (hats included), document order.
inline std::vector<FitnessTarget> buildTargets(const Program& p, const Cfg& cfg,
                                               const ControlDependence& cd) {
    std::set<BlockId> dead = cfg.unreachableFromEntry();
    detail::ChainBuilder chains(cfg, cd);
    std::vector<FitnessTarget> out;
    for (BlockId id : p.allBlockIds) {
        if (dead.count(id)) continue;
        out.push_back(FitnessTarget{id, chains.chainFor(id)});
    }
    return out;
}

// Chain entries count as executed when their branch node appears in the
// trace; artificial event nodes are the dispatcher itself and always count.
inline bool chainNodeExecuted(BlockId id, const ExecutionTrace& trace) {
    if (isEventNode(id)) return true;
    return trace.executed(id);
}

// Number of unexecuted chain entries between the target and the deepest
// executed controlling branch; that branch is the critical one.
inline ApproachResult approachLevel(const FitnessTarget& target,
                                    const ExecutionTrace& trace) {
    if (trace.executed(target.blockId)) return {0, std::nullopt};
    for (size_t j = 0; j < target.dependenceChain.size(); ++j) {
        if (chainNodeExecuted(target.dependenceChain[j].branch, trace))
            return {static_cast<int>(j), target.dependenceChain[j]};
    }
    // nothing in the chain executed (degenerate: unreachable code)
    return {static_cast<int>(target.dependenceChain.size()) + 1, std::nullopt};
}

inline FitnessValue fitness(const FitnessTarget& target, const ExecutionTrace& trace) {
    if (trace.executed(target.blockId)) return {0.0, true};
    ApproachResult a = approachLevel(target, trace);
    double bd = 1.0;
    if (a.criticalBranch) {
        auto it = trace.branchRecords.find(a.criticalBranch->branch);
        if (it == trace.branchRecords.end())
            throw MissingRecord("branch " + std::to_string(a.criticalBranch->branch) +
                                " executed but unrecorded");
        bd = it->second.forOutcome(a.criticalBranch->outcome);
    }
    return {static_cast<double>(a.level) + normalize(bd), false};
}

} // namespace blockevo
