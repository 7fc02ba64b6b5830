#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "blockevo/events.hpp"
#include "blockevo/program.hpp"
#include "blockevo/vm.hpp"

namespace blockevo {

// Codons range over [0, 480]: the stage width, the largest parameter any
// supported event can take.
inline constexpr int kMaxCodon = 480;

struct Chromosome {
    std::vector<int> codons; // length >= 1, each in [0, kMaxCodon]
    size_t length() const { return codons.size(); }
    bool operator==(const Chromosome&) const = default;
};

// The event menu available at one concrete VM state, in fixed order:
// KeyPress, KeyDown, ClickSprite (sprites then clones in creation order),
// ClickStage, TypeText, MouseDown, MouseMove, Sound, Wait(default),
// Wait(distinct program delays ascending).
struct EventMenu {
    std::vector<EventDescriptor> entries;
    size_t size() const { return entries.size(); }
};

inline EventMenu determineEvents(const Program& p, const StaticFacts& facts,
                                 const Vm& vm) {
    EventMenu menu;
    using K = EventDescriptor::Kind;
    for (const auto& key : facts.handledKeys) {
        EventDescriptor e; e.kind = K::KeyPress; e.key = key;
        menu.entries.push_back(e);
    }
    for (const auto& key : facts.sensedKeys) {
        EventDescriptor e; e.kind = K::KeyDown; e.key = key;
        menu.entries.push_back(e);
    }
    for (const auto& spriteName : facts.clickableSprites) {
        EventDescriptor e; e.kind = K::ClickSprite; e.target = spriteName;
        menu.entries.push_back(e);
        for (const auto& inst : vm.instances()) {
            if (!inst.alive || !inst.isClone || inst.def->name != spriteName) continue;
            EventDescriptor c; c.kind = K::ClickSprite; c.target = inst.instanceId;
            menu.entries.push_back(c);
        }
    }
    if (facts.stageClickable) {
        EventDescriptor e; e.kind = K::ClickStage;
        menu.entries.push_back(e);
    }
    if (facts.usesAnswer && vm.askPending()) {
        for (const auto& s : facts.stringLiterals) {
            EventDescriptor e; e.kind = K::TypeText; e.text = s;
            menu.entries.push_back(e);
        }
    }
    if (facts.usesMouseDown) {
        EventDescriptor e; e.kind = K::MouseDown;
        menu.entries.push_back(e);
    }
    if (facts.usesMousePosition) {
        EventDescriptor e; e.kind = K::MouseMove; // coordinates from the next two codons
        menu.entries.push_back(e);
    }
    for (double th : facts.loudnessThresholds) {
        EventDescriptor e; e.kind = K::Sound;
        e.volume = std::min(th + 1.0, 100.0); // loud enough to trigger the handler
        menu.entries.push_back(e);
    }
    {
        EventDescriptor e; e.kind = K::Wait;
        e.durationMs = vm.config().stepDurationMs; // default: one step
        menu.entries.push_back(e);
    }
    std::vector<double> delays = facts.delaySeconds;
    std::sort(delays.begin(), delays.end());
    for (double d : delays) {
        EventDescriptor e; e.kind = K::Wait; e.durationMs = d * 1000.0;
        menu.entries.push_back(e);
    }
    return menu;
}

struct DecodedRun {
    EventList events;
    ExecutionTrace trace;
    uint64_t seed = 0;
};

// Genotype -> phenotype mapping interleaved with execution: each codon picks
// r = c mod n from the menu computed at the current state, parameter codons
// follow (wrapping to the start when the genotype runs out), and the event is
// applied so the next menu reflects the new state. The same run doubles as
// the fitness execution.
inline DecodedRun evaluateChromosome(const Chromosome& ch, const Program& p,
                                     const StaticFacts& facts, const StepConfig& cfg,
                                     uint64_t seed, int64_t maxSteps = 200000) {
    Vm vm(p, cfg, seed);
    DecodedRun out;
    out.seed = seed;
    const size_t n = ch.codons.size();
    size_t i = 0;
    int stageW = static_cast<int>(p.stageWidth);
    int stageH = static_cast<int>(p.stageHeight);
    while (i < n) {
        if (vm.halted() || vm.trace().budgetExceeded) break;
        EventMenu menu = determineEvents(p, facts, vm);
        EventDescriptor e =
            menu.entries[static_cast<size_t>(ch.codons[i]) % menu.size()];
        ++i;
        if (e.kind == EventDescriptor::Kind::MouseMove) {
            int cx = ch.codons[i % n]; ++i;
            int cy = ch.codons[i % n]; ++i;
            e.x = cx % (stageW + 1) - stageW / 2;
            e.y = cy % (stageH + 1) - stageH / 2;
        }
        out.events.push_back(e);
        vm.runEvent(e, maxSteps);
    }
    out.trace = vm.trace();
    return out;
}

inline EventList decode(const Chromosome& ch, const Program& p, const StaticFacts& facts,
                        const StepConfig& cfg, uint64_t seed) {
    return evaluateChromosome(ch, p, facts, cfg, seed).events;
}

} // namespace blockevo
