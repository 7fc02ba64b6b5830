#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "blockevo/campaign.hpp"
#include "blockevo/cfg.hpp"
#include "blockevo/encoding.hpp"
#include "blockevo/fitness.hpp"
#include "blockevo/rng.hpp"

namespace blockevo {

struct MutationRates {
    double replace = 1.0 / 3.0;
    double insert = 1.0 / 3.0;
    double remove = 1.0 / 3.0;
};

struct SearchBudget {
    // Wall-clock-equivalent time across evaluations: one step costs
    // stepDuration / acceleration, so accelerated campaigns fit more steps
    // into the same budget.
    double maxWallMs = -1;
    int64_t maxEvaluations = -1; // number of executed tests
    int64_t maxGenerations = -1;
    bool unlimited() const {
        return maxWallMs < 0 && maxEvaluations < 0 && maxGenerations < 0;
    }
};

struct SearchConfig {
    int populationSize = 10;
    double crossoverProbability = 0.8;
    int initialLength = 2;
    int maxLength = 50;
    MutationRates mutationRates;
    double rankBias = 1.7;
    SearchBudget budget;
    uint64_t seed = 0;
    int64_t maxStepsPerTest = 20000;
    int jobs = 1;
};

// ---------------------------------------------------------------------------
// Variable-length GA operators
// ---------------------------------------------------------------------------

inline Chromosome randomChromosome(const SearchConfig& cfg, Rng& rng) {
    int maxLen = std::max(1, std::min(cfg.initialLength, cfg.maxLength));
    int len = static_cast<int>(rng.intIn(1, maxLen));
    Chromosome ch;
    ch.codons.reserve(len);
    for (int i = 0; i < len; ++i)
        ch.codons.push_back(static_cast<int>(rng.intIn(0, kMaxCodon)));
    return ch;
}

// Each operator fires with its own probability; within one, every position
// is affected with probability 1/len, so the expected length change is zero.
inline Chromosome mutate(const Chromosome& ch, const SearchConfig& cfg, Rng& rng) {
    Chromosome out = ch;
    const auto& rates = cfg.mutationRates;
    if (rng.chance(rates.replace)) {
        double p = 1.0 / static_cast<double>(out.codons.size());
        for (auto& c : out.codons)
            if (rng.chance(p)) c = static_cast<int>(rng.intIn(0, kMaxCodon));
    }
    if (rng.chance(rates.insert)) {
        double p = 1.0 / static_cast<double>(out.codons.size());
        std::vector<int> next;
        next.reserve(out.codons.size() + 2);
        for (int c : out.codons) {
            if (rng.chance(p)) next.push_back(static_cast<int>(rng.intIn(0, kMaxCodon)));
            next.push_back(c);
        }
        out.codons = std::move(next);
    }
    if (rng.chance(rates.remove)) {
        double p = 1.0 / static_cast<double>(out.codons.size());
        std::vector<int> next;
        next.reserve(out.codons.size());
        for (int c : out.codons)
            if (!rng.chance(p)) next.push_back(c);
        if (next.empty()) next.push_back(out.codons.front());
        out.codons = std::move(next);
    }
    if (static_cast<int>(out.codons.size()) > cfg.maxLength)
        out.codons.resize(cfg.maxLength);
    return out;
}

// Single-point crossover at the same relative point in both parents; tails
// are swapped, so total length is conserved.
inline std::pair<Chromosome, Chromosome> crossover(const Chromosome& a,
                                                   const Chromosome& b, double rho) {
    size_t splitA = static_cast<size_t>(rho * static_cast<double>(a.codons.size()));
    size_t splitB = static_cast<size_t>(rho * static_cast<double>(b.codons.size()));
    splitA = std::min(splitA, a.codons.size());
    splitB = std::min(splitB, b.codons.size());
    Chromosome ca, cb;
    ca.codons.assign(a.codons.begin(), a.codons.begin() + splitA);
    ca.codons.insert(ca.codons.end(), b.codons.begin() + splitB, b.codons.end());
    cb.codons.assign(b.codons.begin(), b.codons.begin() + splitB);
    cb.codons.insert(cb.codons.end(), a.codons.begin() + splitA, a.codons.end());
    if (ca.codons.empty() && !cb.codons.empty()) {
        ca.codons.push_back(cb.codons.back());
        cb.codons.pop_back();
    }
    if (cb.codons.empty() && !ca.codons.empty()) {
        cb.codons.push_back(ca.codons.back());
        ca.codons.pop_back();
    }
    return {std::move(ca), std::move(cb)};
}

inline std::pair<Chromosome, Chromosome> crossover(const Chromosome& a,
                                                   const Chromosome& b, Rng& rng) {
    return crossover(a, b, rng.unit());
}

// Linear ranking with bias; index 0 is the best-ranked individual.
inline size_t rankSelect(size_t n, double bias, Rng& rng) {
    if (n <= 1) return 0;
    double u = rng.unit();
    double acc = 0;
    for (size_t r = 0; r < n; ++r) {
        double p = (bias - 2.0 * (bias - 1.0) * static_cast<double>(r) /
                               static_cast<double>(n - 1)) /
                   static_cast<double>(n);
        acc += p;
        if (u < acc) return r;
    }
    return n - 1;
}

// ---------------------------------------------------------------------------
// MOSA
// ---------------------------------------------------------------------------

struct Individual {
    Chromosome chrom;
    EventList events;
    std::set<BlockId> covered;
    std::vector<double> fit; // aligned with the target list
    uint64_t vmSeed = 0;
    int64_t stepsUsed = 0;
};

struct ArchiveEntry {
    Chromosome chrom;
    EventList events;
    std::set<BlockId> covered;
    uint64_t vmSeed = 0;
    size_t length = 0;
};

// Shortest covering test per objective; replacement only by strictly
// shorter covering tests, so coverage never regresses.
class Archive {
public:
    bool offer(BlockId target, const Individual& ind) {
        size_t len = ind.events.size();
        auto it = entries_.find(target);
        if (it != entries_.end() && it->second.length <= len) return false;
        ArchiveEntry e{ind.chrom, ind.events, ind.covered, ind.vmSeed, len};
        entries_[target] = std::move(e);
        return true;
    }
    size_t size() const { return entries_.size(); }
    bool covers(BlockId target) const { return entries_.count(target) > 0; }
    const std::map<BlockId, ArchiveEntry>& entries() const { return entries_; }

private:
    std::map<BlockId, ArchiveEntry> entries_;
};

namespace detail {

inline bool dominates(const Individual& x, const Individual& y,
                      const std::vector<size_t>& objectives) {
    bool strict = false;
    for (size_t o : objectives) {
        if (x.fit[o] > y.fit[o]) return false;
        if (x.fit[o] < y.fit[o]) strict = true;
    }
    return strict;
}

// Non-dominated sorting restricted to the given objective indices.
inline std::vector<std::vector<size_t>> sortFronts(
    const std::vector<Individual>& pool, const std::vector<size_t>& members,
    const std::vector<size_t>& objectives) {
    std::vector<std::vector<size_t>> fronts;
    std::vector<size_t> remaining = members;
    while (!remaining.empty()) {
        std::vector<size_t> front;
        for (size_t i : remaining) {
            bool dominated = false;
            for (size_t j : remaining) {
                if (i == j) continue;
                if (dominates(pool[j], pool[i], objectives)) { dominated = true; break; }
            }
            if (!dominated) front.push_back(i);
        }
        if (front.empty()) { fronts.push_back(remaining); break; } // all mutually equal
        std::set<size_t> inFront(front.begin(), front.end());
        std::vector<size_t> next;
        for (size_t i : remaining)
            if (!inFront.count(i)) next.push_back(i);
        fronts.push_back(std::move(front));
        remaining = std::move(next);
    }
    return fronts;
}

inline std::map<size_t, double> crowdingDistances(
    const std::vector<Individual>& pool, const std::vector<size_t>& front,
    const std::vector<size_t>& objectives) {
    std::map<size_t, double> crowd;
    for (size_t i : front) crowd[i] = 0;
    if (front.size() <= 2) {
        for (size_t i : front) crowd[i] = std::numeric_limits<double>::infinity();
        return crowd;
    }
    for (size_t o : objectives) {
        std::vector<size_t> order = front;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return pool[a].fit[o] < pool[b].fit[o];
        });
        double lo = pool[order.front()].fit[o], hi = pool[order.back()].fit[o];
        crowd[order.front()] = std::numeric_limits<double>::infinity();
        crowd[order.back()] = std::numeric_limits<double>::infinity();
        if (hi <= lo) continue;
        for (size_t k = 1; k + 1 < order.size(); ++k)
            crowd[order[k]] +=
                (pool[order[k + 1]].fit[o] - pool[order[k - 1]].fit[o]) / (hi - lo);
    }
    return crowd;
}

} // namespace detail

// Full preference-sorted ranking of a pool: front 0 holds, per uncovered
// objective, the shortest test closest to covering it; the rest is NSGA-II
// style non-dominated sorting with crowding-distance ordering inside fronts.
inline std::vector<std::vector<size_t>> mosaRank(const std::vector<Individual>& pool,
                                                 const std::vector<size_t>& objectives) {
    std::vector<std::vector<size_t>> fronts;
    if (pool.empty()) return fronts;
    std::vector<size_t> all(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) all[i] = i;
    if (objectives.empty()) { fronts.push_back(all); return fronts; }

    std::set<size_t> preferred;
    for (size_t o : objectives) {
        size_t best = 0;
        for (size_t i = 1; i < pool.size(); ++i) {
            double fi = pool[i].fit[o], fb = pool[best].fit[o];
            if (fi < fb ||
                (fi == fb && pool[i].events.size() < pool[best].events.size()))
                best = i;
        }
        preferred.insert(best);
    }
    fronts.emplace_back(preferred.begin(), preferred.end());
    std::vector<size_t> rest;
    for (size_t i : all)
        if (!preferred.count(i)) rest.push_back(i);
    auto sub = detail::sortFronts(pool, rest, objectives);
    fronts.insert(fronts.end(), sub.begin(), sub.end());
    return fronts;
}

// ---------------------------------------------------------------------------
// Suite generation
// ---------------------------------------------------------------------------

struct SuiteTest {
    EventList events;
    std::vector<BlockId> coversBlockIds;
    uint64_t seed = 0;
};

struct TestSuite {
    std::vector<SuiteTest> tests;
    std::set<BlockId> coveredUnion;
    std::vector<BlockId> targetIds;
    StepConfig stepConfig; // replaying needs the generation-time clock setup
};

class SuiteGenerator {
public:
    SuiteGenerator(const Program& p, SearchConfig cfg, StepConfig stepCfg)
        : program_(p), cfg_(cfg), stepCfg_(stepCfg), rng_(cfg.seed),
          facts_(collectStaticFacts(p)), cfgGraph_(buildSuperCfg(p)) {
        auto cd = controlDependencies(cfgGraph_);
        targets_ = buildTargets(p, cfgGraph_, cd);
        log_.totalTargets = static_cast<int>(targets_.size());
        // One VM seed for the whole campaign: in-program randomness stays
        // identical across evaluations, so fitness gradients are stable
        // instead of resampling the program's random choices per test.
        vmSeed_ = rng_.fork();
    }

    const std::vector<FitnessTarget>& targets() const { return targets_; }
    const Archive& archive() const { return archive_; }
    const CampaignLog& log() const { return log_; }

    // Runs MOSA until the budget ends or everything is covered.
    TestSuite run() {
        std::vector<Individual> pop;
        for (int i = 0; i < cfg_.populationSize && !stop(); ++i) {
            Individual ind = makeIndividual(randomChromosome(cfg_, rng_));
            if (!admit(ind)) break;
            pop.push_back(std::move(ind));
        }
        int64_t generation = 0;
        while (!stop() && !pop.empty()) {
            if (cfg_.budget.maxGenerations >= 0 && generation >= cfg_.budget.maxGenerations)
                break;
            pop = nextGeneration(pop);
            ++generation;
        }
        return buildSuite();
    }

    TestSuite buildSuite() const {
        TestSuite suite;
        suite.stepConfig = stepCfg_;
        for (const auto& t : targets_) suite.targetIds.push_back(t.blockId);
        std::vector<const ArchiveEntry*> seen;
        for (const auto& [target, entry] : archive_.entries()) {
            (void)target;
            bool dup = false;
            for (const auto* e : seen)
                if (e->vmSeed == entry.vmSeed && e->events == entry.events) { dup = true; break; }
            if (dup) continue;
            seen.push_back(&entry);
            SuiteTest st;
            st.events = entry.events;
            st.seed = entry.vmSeed;
            for (BlockId id : entry.covered)
                if (isTarget(id)) st.coversBlockIds.push_back(id);
            suite.tests.push_back(std::move(st));
        }
        for (const auto& [target, entry] : archive_.entries()) {
            (void)entry;
            suite.coveredUnion.insert(target);
        }
        return suite;
    }

    // One generation: rank-selected parents, crossover, mutation, combined
    // preference ranking, survival by front then crowding.
    std::vector<Individual> nextGeneration(std::vector<Individual> parents) {
        if (parents.empty()) return parents;
        std::vector<Individual> offspring;
        while (static_cast<int>(offspring.size()) < cfg_.populationSize && !stop()) {
            size_t ia = rankSelect(parents.size(), cfg_.rankBias, rng_);
            size_t ib = rankSelect(parents.size(), cfg_.rankBias, rng_);
            Chromosome ca = parents[ia].chrom, cb = parents[ib].chrom;
            if (rng_.chance(cfg_.crossoverProbability)) {
                auto [x, y] = crossover(ca, cb, rng_);
                ca = std::move(x);
                cb = std::move(y);
            }
            ca = mutate(ca, cfg_, rng_);
            cb = mutate(cb, cfg_, rng_);
            for (Chromosome* c : {&ca, &cb}) {
                if (static_cast<int>(offspring.size()) >= cfg_.populationSize || stop())
                    break;
                Individual ind = makeIndividual(*c);
                if (!admit(ind)) break;
                offspring.push_back(std::move(ind));
            }
        }
        std::vector<Individual> pool = std::move(parents);
        for (auto& o : offspring) pool.push_back(std::move(o));

        std::vector<size_t> objectives = uncoveredObjectives();
        auto fronts = mosaRank(pool, objectives);
        std::vector<Individual> next;
        for (const auto& front : fronts) {
            if (static_cast<int>(next.size()) >= cfg_.populationSize) break;
            size_t room = static_cast<size_t>(cfg_.populationSize) - next.size();
            if (front.size() <= room) {
                auto crowd = detail::crowdingDistances(pool, front, objectives);
                std::vector<size_t> order = front;
                std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                    return crowd[a] > crowd[b];
                });
                for (size_t i : order) next.push_back(pool[i]);
            } else {
                auto crowd = detail::crowdingDistances(pool, front, objectives);
                std::vector<size_t> order = front;
                std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                    return crowd[a] > crowd[b];
                });
                for (size_t k = 0; k < room; ++k) next.push_back(pool[order[k]]);
            }
        }
        return next;
    }

    Individual makeIndividual(const Chromosome& ch) {
        Individual ind;
        ind.chrom = ch;
        ind.vmSeed = vmSeed_;
        DecodedRun run = evaluateChromosome(ch, program_, facts_, stepCfg_, ind.vmSeed,
                                            cfg_.maxStepsPerTest);
        ind.events = std::move(run.events);
        ind.stepsUsed = run.trace.stepsExecuted;
        ind.fit.resize(targets_.size());
        for (size_t i = 0; i < targets_.size(); ++i) {
            FitnessValue v = fitness(targets_[i], run.trace);
            ind.fit[i] = v.raw;
            if (v.covered) ind.covered.insert(targets_[i].blockId);
        }
        return ind;
    }

    bool fullCoverage() const { return archive_.size() == targets_.size(); }

private:
    bool isTarget(BlockId id) const {
        for (const auto& t : targets_)
            if (t.blockId == id) return true;
        return false;
    }

    std::vector<size_t> uncoveredObjectives() const {
        std::vector<size_t> out;
        for (size_t i = 0; i < targets_.size(); ++i)
            if (!archive_.covers(targets_[i].blockId)) out.push_back(i);
        return out;
    }

    // Accounts one evaluated individual: archive, log, budget. Returns false
    // once the budget is exhausted (the individual still counts).
    bool admit(const Individual& ind) {
        ++evaluations_;
        wallMsUsed_ += static_cast<double>(ind.stepsUsed) * stepCfg_.stepDurationMs /
                       stepCfg_.accelerationFactor;
        for (BlockId id : ind.covered) archive_.offer(id, ind);
        log_.rows.push_back({wallMsUsed_, evaluations_,
                             static_cast<int>(archive_.size()),
                             static_cast<int>(targets_.size())});
        return !stop();
    }

    bool stop() const {
        if (fullCoverage()) return true;
        const auto& b = cfg_.budget;
        if (b.maxEvaluations >= 0 && evaluations_ >= b.maxEvaluations) return true;
        if (b.maxWallMs >= 0 && wallMsUsed_ >= b.maxWallMs) return true;
        return false;
    }

    const Program& program_;
    SearchConfig cfg_;
    StepConfig stepCfg_;
    Rng rng_;
    StaticFacts facts_;
    Cfg cfgGraph_;
    std::vector<FitnessTarget> targets_;
    Archive archive_;
    CampaignLog log_;
    int64_t evaluations_ = 0;
    double wallMsUsed_ = 0;
    uint64_t vmSeed_ = 0;
};

struct GenerateResult {
    TestSuite suite;
    CampaignLog log;
    size_t targetCount = 0;
    size_t coveredCount = 0;
};

inline GenerateResult generateSuite(const Program& p, const SearchConfig& cfg,
                                    const StepConfig& stepCfg) {
    SuiteGenerator gen(p, cfg, stepCfg);
    GenerateResult res;
    res.suite = gen.run();
    res.log = gen.log();
    res.targetCount = gen.targets().size();
    res.coveredCount = gen.archive().size();
    return res;
}

} // namespace blockevo
