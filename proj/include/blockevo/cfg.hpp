#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blockevo/program.hpp"
#include "blockevo/vm.hpp"

namespace blockevo {

enum class EdgeLabel { True, False, Flow, Event, Broadcast, Clone, Call, Return };

inline const char* edgeLabelName(EdgeLabel l) {
    switch (l) {
        case EdgeLabel::True: return "true";
        case EdgeLabel::False: return "false";
        case EdgeLabel::Flow: return "flow";
        case EdgeLabel::Event: return "event";
        case EdgeLabel::Broadcast: return "broadcast";
        case EdgeLabel::Clone: return "clone";
        case EdgeLabel::Call: return "call";
        case EdgeLabel::Return: return "return";
    }
    return "?";
}

struct CfgEdge {
    BlockId from, to;
    EdgeLabel label;
    bool operator<(const CfgEdge& o) const {
        return std::tie(from, to, label) < std::tie(o.from, o.to, o.label);
    }
    bool operator==(const CfgEdge& o) const {
        return from == o.from && to == o.to && label == o.label;
    }
};

class Cfg {
public:
    std::map<BlockId, std::string> nodeLabels; // all nodes incl. entry/exit
    std::vector<CfgEdge> edges;
    std::set<BlockId> userEventNodes; // event nodes fed directly by user input

    bool hasNode(BlockId id) const { return nodeLabels.count(id) > 0; }

    std::vector<BlockId> nodeIds() const {
        std::vector<BlockId> out;
        for (const auto& [id, l] : nodeLabels) { (void)l; out.push_back(id); }
        return out;
    }

    std::vector<BlockId> artificialEventNodes() const {
        std::vector<BlockId> out;
        for (const auto& [id, l] : nodeLabels) {
            (void)l;
            if (isEventNode(id) && id < kScriptEndBase) out.push_back(id);
        }
        return out;
    }

    std::vector<const CfgEdge*> outEdges(BlockId n) const {
        std::vector<const CfgEdge*> out;
        for (const auto& e : edges)
            if (e.from == n) out.push_back(&e);
        return out;
    }

    bool hasEdge(BlockId from, BlockId to) const {
        for (const auto& e : edges)
            if (e.from == from && e.to == to) return true;
        return false;
    }

    // Nodes with no path from entry; dead code and never-triggered internal
    // event handlers end up here.
    std::set<BlockId> unreachableFromEntry() const {
        std::set<BlockId> seen{kEntryNode};
        std::vector<BlockId> work{kEntryNode};
        std::multimap<BlockId, BlockId> adj;
        for (const auto& e : edges) adj.emplace(e.from, e.to);
        while (!work.empty()) {
            BlockId n = work.back();
            work.pop_back();
            auto [lo, hi] = adj.equal_range(n);
            for (auto it = lo; it != hi; ++it)
                if (seen.insert(it->second).second) work.push_back(it->second);
        }
        std::set<BlockId> out;
        for (const auto& [id, l] : nodeLabels) {
            (void)l;
            if (!seen.count(id)) out.insert(id);
        }
        return out;
    }

    std::string toDot() const {
        std::ostringstream os;
        os << "digraph cfg {\n";
        os << "  rankdir=TB;\n";
        for (const auto& [id, label] : nodeLabels) {
            os << "  n" << (id < 0 ? "m" + std::to_string(-id) : std::to_string(id))
               << " [label=\"" << label << "\"";
            if (isEventNode(id) && id < kScriptEndBase) os << ", shape=diamond";
            os << "];\n";
        }
        auto name = [](BlockId id) {
            return id < 0 ? "nm" + std::to_string(-id) : "n" + std::to_string(id);
        };
        std::vector<CfgEdge> sorted = edges;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& e : sorted)
            os << "  " << name(e.from) << " -> " << name(e.to) << " [label=\""
               << edgeLabelName(e.label) << "\"];\n";
        os << "}\n";
        return os.str();
    }
};

namespace detail {

struct CfgBuilder {
    const Program& p;
    Cfg cfg;
    std::set<CfgEdge> edgeSet;
    std::map<std::pair<std::string, std::string>, int> procIdx;
    // procedure entry (first node of body, or its end node when empty)
    std::map<std::pair<std::string, std::string>, BlockId> procEntry;
    // receive-message -> artificial event nodes; clone sprite -> event nodes
    std::multimap<std::string, std::pair<BlockId, BlockId>> receivers; // msg -> (evtNode, scriptEnd)
    std::multimap<std::string, BlockId> cloneHandlers;                  // sprite -> evtNode
    const SpriteDef* currentSprite = nullptr;

    explicit CfgBuilder(const Program& prog) : p(prog), procIdx(procedureIndices(prog)) {}

    void addNode(BlockId id, std::string label) { cfg.nodeLabels.emplace(id, std::move(label)); }

    void addEdge(BlockId from, BlockId to, EdgeLabel label) {
        CfgEdge e{from, to, label};
        if (edgeSet.insert(e).second) cfg.edges.push_back(e);
    }

    static std::string hatLabel(const Hat& h, const std::string& spriteName) {
        switch (h.kind) {
            case HatKind::GreenFlag: return "flagclicked";
            case HatKind::KeyPressed: return "keypressed:" + h.key;
            case HatKind::SpriteClicked: return "thisspriteclicked:" + spriteName;
            case HatKind::StageClicked: return "stageclicked";
            case HatKind::ReceiveMessage: return "receive:" + h.message;
            case HatKind::StartAsClone: return "startasclone:" + spriteName;
            case HatKind::LoudnessGreater: {
                std::string t = Value::formatNumber(h.threshold);
                return "loudness>" + t;
            }
        }
        return "?";
    }

    static bool userInputHat(HatKind k) {
        return k == HatKind::GreenFlag || k == HatKind::KeyPressed ||
               k == HatKind::SpriteClicked || k == HatKind::StageClicked ||
               k == HatKind::LoudnessGreater;
    }

    void declareScripts() {
        for (const SpriteDef* a : p.actors()) {
            for (const auto& sc : a->scripts) {
                BlockId evt = eventNodeId(sc.hat.id);
                BlockId end = scriptEndId(sc.hat.id);
                addNode(evt, hatLabel(sc.hat, a->name));
                addNode(sc.hat.id, "hat:" + hatLabel(sc.hat, a->name));
                addNode(end, "end:" + hatLabel(sc.hat, a->name));
                addEdge(evt, sc.hat.id, EdgeLabel::True);
                addEdge(evt, kExitNode, EdgeLabel::False);
                addEdge(end, kExitNode, EdgeLabel::Flow);
                if (userInputHat(sc.hat.kind)) {
                    addEdge(kEntryNode, evt, EdgeLabel::Event);
                    cfg.userEventNodes.insert(evt);
                }
                if (sc.hat.kind == HatKind::ReceiveMessage)
                    receivers.emplace(sc.hat.message, std::make_pair(evt, end));
                if (sc.hat.kind == HatKind::StartAsClone)
                    cloneHandlers.emplace(a->name, evt);
            }
        }
    }

    void declareProcedures() {
        for (const SpriteDef* a : p.actors()) {
            for (const auto& [pn, body] : a->procedures) {
                (void)body;
                int idx = procIdx.at({a->name, pn});
                addNode(procEndId(idx), "end:" + a->name + "." + pn);
                addEdge(procEndId(idx), kExitNode, EdgeLabel::Flow);
            }
        }
    }

    void declareBlockNodes(const std::vector<Block>& blocks) {
        for (const auto& b : blocks) {
            addNode(b.id, opcodeName(b.op));
            for (const auto& kids : b.children) declareBlockNodes(kids);
        }
    }

    // Wires a block list so that falling off its end reaches succ; returns
    // the entry node of the list.
    BlockId buildList(const std::vector<Block>& blocks, BlockId succ) {
        BlockId cur = succ;
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
            wireBlock(*it, cur);
            cur = it->id;
        }
        return cur;
    }

    void wireBlock(const Block& b, BlockId succ) {
        switch (b.op) {
            case Op::If: {
                BlockId thenEntry = buildList(b.children[0], succ);
                addEdge(b.id, thenEntry, EdgeLabel::True);
                addEdge(b.id, succ, EdgeLabel::False);
                break;
            }
            case Op::IfElse: {
                BlockId thenEntry = buildList(b.children[0], succ);
                BlockId elseEntry = buildList(b.children[1], succ);
                addEdge(b.id, thenEntry, EdgeLabel::True);
                addEdge(b.id, elseEntry, EdgeLabel::False);
                break;
            }
            case Op::Repeat: {
                BlockId bodyEntry = buildList(b.children[0], b.id);
                addEdge(b.id, bodyEntry, EdgeLabel::True);
                addEdge(b.id, succ, EdgeLabel::False);
                break;
            }
            case Op::Forever: {
                BlockId bodyEntry = buildList(b.children[0], b.id);
                addEdge(b.id, bodyEntry, EdgeLabel::True);
                // never executable; keeps post-dominance well defined
                addEdge(b.id, succ, EdgeLabel::False);
                break;
            }
            case Op::WaitUntil:
                addEdge(b.id, succ, EdgeLabel::True);
                addEdge(b.id, kExitNode, EdgeLabel::False); // may wait forever
                break;
            case Op::StopAll:
                addEdge(b.id, kExitNode, EdgeLabel::Flow);
                break;
            case Op::Broadcast: {
                addEdge(b.id, succ, EdgeLabel::Flow);
                auto [lo, hi] = receivers.equal_range(b.strArg);
                for (auto it = lo; it != hi; ++it)
                    addEdge(b.id, it->second.first, EdgeLabel::Broadcast);
                break;
            }
            case Op::BroadcastAndWait: {
                auto [lo, hi] = receivers.equal_range(b.strArg);
                if (lo == hi) {
                    addEdge(b.id, succ, EdgeLabel::Flow);
                } else {
                    for (auto it = lo; it != hi; ++it) {
                        addEdge(b.id, it->second.first, EdgeLabel::Broadcast);
                        addEdge(it->second.second, succ, EdgeLabel::Return);
                    }
                }
                break;
            }
            case Op::CreateCloneOf: {
                addEdge(b.id, succ, EdgeLabel::Flow);
                auto [lo, hi] = cloneHandlers.equal_range(b.strArg);
                for (auto it = lo; it != hi; ++it)
                    addEdge(b.id, it->second, EdgeLabel::Clone);
                break;
            }
            case Op::CallProcedure: {
                auto key = std::make_pair(currentSprite->name, b.strArg);
                auto entryIt = procEntry.find(key);
                if (entryIt == procEntry.end() || entryIt->second == procEndId(procIdx.at(key))) {
                    addEdge(b.id, succ, EdgeLabel::Flow); // empty body
                } else {
                    addEdge(b.id, entryIt->second, EdgeLabel::Call);
                    addEdge(procEndId(procIdx.at(key)), succ, EdgeLabel::Return);
                }
                break;
            }
            default:
                addEdge(b.id, succ, EdgeLabel::Flow);
                break;
        }
    }

    Cfg build() {
        addNode(kEntryNode, "entry");
        addNode(kExitNode, "exit");
        addEdge(kEntryNode, kExitNode, EdgeLabel::Flow);
        declareScripts();
        declareProcedures();
        for (const SpriteDef* a : p.actors()) {
            for (const auto& sc : a->scripts) declareBlockNodes(sc.body);
            for (const auto& [pn, body] : a->procedures) { (void)pn; declareBlockNodes(body); }
        }
        // procedure bodies first so call sites can resolve entries
        for (const SpriteDef* a : p.actors()) {
            currentSprite = a;
            for (const auto& [pn, body] : a->procedures) {
                int idx = procIdx.at({a->name, pn});
                procEntry[{a->name, pn}] = buildList(body, procEndId(idx));
            }
        }
        for (const SpriteDef* a : p.actors()) {
            currentSprite = a;
            for (const auto& sc : a->scripts) {
                BlockId bodyEntry = buildList(sc.body, scriptEndId(sc.hat.id));
                addEdge(sc.hat.id, bodyEntry, EdgeLabel::Flow);
            }
        }
        return std::move(cfg);
    }
};

} // namespace detail

// Interprocedural super-CFG: per-script CFGs joined by artificial event
// nodes, broadcast edges, clone edges and procedure call/return edges.
inline Cfg buildSuperCfg(const Program& p) {
    detail::CfgBuilder builder(p);
    return builder.build();
}

// ---------------------------------------------------------------------------
// Post-dominance and control dependence
// ---------------------------------------------------------------------------

struct ControlDep {
    BlockId branch;
    bool outcome; // required branch outcome (non-branch fork edges count as true)
    bool operator<(const ControlDep& o) const {
        return std::tie(branch, outcome) < std::tie(o.branch, o.outcome);
    }
    bool operator==(const ControlDep& o) const {
        return branch == o.branch && outcome == o.outcome;
    }
};

using ControlDependence = std::map<BlockId, std::vector<ControlDep>>;

// Standard iterative post-dominator sets; graphs here are tiny.
inline std::map<BlockId, std::set<BlockId>> postDominators(const Cfg& cfg) {
    std::vector<BlockId> nodes = cfg.nodeIds();
    std::set<BlockId> all(nodes.begin(), nodes.end());
    std::multimap<BlockId, BlockId> succ;
    for (const auto& e : cfg.edges) succ.emplace(e.from, e.to);

    std::map<BlockId, std::set<BlockId>> pdom;
    for (BlockId n : nodes) pdom[n] = (n == kExitNode) ? std::set<BlockId>{n} : all;

    bool changed = true;
    while (changed) {
        changed = false;
        for (BlockId n : nodes) {
            if (n == kExitNode) continue;
            std::set<BlockId> inter;
            bool first = true;
            auto [lo, hi] = succ.equal_range(n);
            for (auto it = lo; it != hi; ++it) {
                const auto& s = pdom[it->second];
                if (first) { inter = s; first = false; }
                else {
                    std::set<BlockId> tmp;
                    std::set_intersection(inter.begin(), inter.end(), s.begin(), s.end(),
                                          std::inserter(tmp, tmp.begin()));
                    inter = std::move(tmp);
                }
            }
            if (first) inter.clear(); // no successors: only itself below
            inter.insert(n);
            if (inter != pdom[n]) { pdom[n] = std::move(inter); changed = true; }
        }
    }
    return pdom;
}

inline std::map<BlockId, BlockId> immediatePostDominators(
    const std::map<BlockId, std::set<BlockId>>& pdom) {
    std::map<BlockId, BlockId> ipdom;
    for (const auto& [n, doms] : pdom) {
        if (n == kExitNode) continue;
        BlockId best = kExitNode;
        size_t bestSize = 0;
        bool found = false;
        for (BlockId d : doms) {
            if (d == n) continue;
            size_t sz = pdom.at(d).size();
            if (!found || sz > bestSize) { best = d; bestSize = sz; found = true; }
        }
        if (found) ipdom[n] = best;
    }
    return ipdom;
}

// Ferrante-Ottenstein-Warren over every fork edge. Nodes on the post-
// dominator path from the edge target up to (excluding) ipdom(fork) are
// control-dependent on that edge.
inline ControlDependence controlDependencies(const Cfg& cfg) {
    auto pdom = postDominators(cfg);
    auto ipdom = immediatePostDominators(pdom);

    std::map<BlockId, int> outDegree;
    for (const auto& e : cfg.edges) outDegree[e.from]++;

    ControlDependence cd;
    for (const auto& [id, label] : cfg.nodeLabels) { (void)label; cd[id]; }

    for (const auto& e : cfg.edges) {
        if (outDegree[e.from] < 2) continue;
        bool outcome = e.label != EdgeLabel::False;
        BlockId stop = ipdom.count(e.from) ? ipdom.at(e.from) : kExitNode;
        BlockId w = e.to;
        std::set<BlockId> guard;
        while (w != stop && guard.insert(w).second) {
            if (w != e.from) {
                auto& deps = cd[w];
                ControlDep dep{e.from, outcome};
                if (std::find(deps.begin(), deps.end(), dep) == deps.end())
                    deps.push_back(dep);
            }
            if (!ipdom.count(w)) break;
            w = ipdom.at(w);
        }
    }
    for (auto& [n, deps] : cd) { (void)n; std::sort(deps.begin(), deps.end()); }
    return cd;
}

} // namespace blockevo
