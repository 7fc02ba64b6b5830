#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "blockevo/campaign.hpp"
#include "blockevo/cfg.hpp"
#include "blockevo/encoding.hpp"
#include "blockevo/fitness.hpp"
#include "blockevo/rng.hpp"

namespace blockevo {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RandomConfig {
    double budgetMs = 60000;        // wall-equivalent campaign time
    double eventIntervalMs = 250;   // one random menu event per interval
    double resetIntervalMs = 10000; // fresh program instance per interval
};

// Random-testing baseline: the program is reset on a fixed cadence and fed
// uniformly random menu events; covered targets accumulate across resets.
// Wait menu entries act as idle intervals - the cadence already spaces
// events out.
inline CampaignLog randomCampaign(const Program& p, const StepConfig& stepCfg,
                                  const RandomConfig& rnd, uint64_t seed) {
    StaticFacts facts = collectStaticFacts(p);
    Cfg cfg = buildSuperCfg(p);
    auto cd = controlDependencies(cfg);
    std::vector<FitnessTarget> targets = buildTargets(p, cfg, cd);
    std::set<BlockId> targetIds;
    for (const auto& t : targets) targetIds.insert(t.blockId);

    CampaignLog log;
    log.totalTargets = static_cast<int>(targets.size());

    Rng rng(seed);
    int64_t cycleSteps = std::max<int64_t>(1, stepCfg.stepsFor(rnd.eventIntervalMs));
    int64_t resetSteps = std::max<int64_t>(1, stepCfg.stepsFor(rnd.resetIntervalMs));

    std::set<BlockId> covered;
    double elapsedMs = 0;
    int64_t eventsInjected = 0;
    int64_t stepsSinceReset = 0;

    int stageW = static_cast<int>(p.stageWidth);
    int stageH = static_cast<int>(p.stageHeight);

    auto vm = std::make_unique<Vm>(p, stepCfg, rng.fork());
    auto harvest = [&]() {
        for (BlockId id : vm->trace().executedBlockIds)
            if (targetIds.count(id)) covered.insert(id);
    };

    while (elapsedMs < rnd.budgetMs) {
        if (stepsSinceReset >= resetSteps) {
            harvest();
            vm = std::make_unique<Vm>(p, stepCfg, rng.fork());
            stepsSinceReset = 0;
        }
        EventMenu menu = determineEvents(p, facts, *vm);
        EventDescriptor e = menu.entries[rng.below(menu.size())];
        if (e.kind == EventDescriptor::Kind::MouseMove) {
            e.x = static_cast<double>(rng.intIn(0, stageW)) - stageW / 2;
            e.y = static_cast<double>(rng.intIn(0, stageH)) - stageH / 2;
        }
        ++eventsInjected;
        for (int64_t s = 0; s < cycleSteps; ++s)
            vm->step(s == 0 ? EventList{e} : EventList{});
        stepsSinceReset += cycleSteps;
        elapsedMs += static_cast<double>(cycleSteps) * stepCfg.stepDurationMs /
                     stepCfg.accelerationFactor;
        harvest();
        log.rows.push_back({elapsedMs, eventsInjected, static_cast<int>(covered.size()),
                            log.totalTargets});
    }
    return log;
}

// ---------------------------------------------------------------------------
// Statistics: Vargha-Delaney A12 and two-sided Mann-Whitney U
// ---------------------------------------------------------------------------

struct StatsReport {
    double a12 = 0.5;
    double pValue = 1.0;
    int nA = 0, nB = 0;
    double meanA = 0, meanB = 0;

    nlohmann::json toJson() const {
        return nlohmann::json{{"a12", a12},   {"pValue", pValue}, {"nA", nA},
                              {"nB", nB},     {"meanA", meanA},   {"meanB", meanB}};
    }
};

// P(draw from a beats draw from b), ties counted half.
inline double varghaDelaneyA12(const std::vector<double>& a, const std::vector<double>& b) {
    double wins = 0;
    for (double x : a)
        for (double y : b) {
            if (x > y) wins += 1.0;
            else if (x == y) wins += 0.5;
        }
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

namespace detail {

inline double uStatistic(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
        for (double y : b) {
            if (x > y) u += 1.0;
            else if (x == y) u += 0.5;
        }
    return u;
}

// Exact two-sided permutation p-value over all group-A assignments.
inline double exactMannWhitneyP(const std::vector<double>& a,
                                const std::vector<double>& b) {
    std::vector<double> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    size_t n = pool.size(), ka = a.size();
    double mu = static_cast<double>(ka) * static_cast<double>(n - ka) / 2.0;
    double obs = std::fabs(uStatistic(a, b) - mu);

    std::vector<size_t> idx(ka);
    for (size_t i = 0; i < ka; ++i) idx[i] = i;
    int64_t total = 0, extreme = 0;
    while (true) {
        std::vector<double> ga, gb;
        std::vector<bool> inA(n, false);
        for (size_t i : idx) inA[i] = true;
        for (size_t i = 0; i < n; ++i) (inA[i] ? ga : gb).push_back(pool[i]);
        ++total;
        if (std::fabs(uStatistic(ga, gb) - mu) >= obs - 1e-12) ++extreme;
        // next combination
        size_t i = ka;
        while (i > 0 && idx[i - 1] == n - ka + i - 1) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (size_t j = i; j < ka; ++j) idx[j] = idx[j - 1] + 1;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

// Normal approximation with tie correction and continuity correction.
inline double approxMannWhitneyP(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    double nA = static_cast<double>(a.size()), nB = static_cast<double>(b.size());
    double N = nA + nB;
    std::vector<double> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    std::sort(pool.begin(), pool.end());
    double tieTerm = 0;
    for (size_t i = 0; i < pool.size();) {
        size_t j = i;
        while (j < pool.size() && pool[j] == pool[i]) ++j;
        double t = static_cast<double>(j - i);
        tieTerm += t * t * t - t;
        i = j;
    }
    double mu = nA * nB / 2.0;
    double var = nA * nB / 12.0 * ((N + 1.0) - tieTerm / (N * (N - 1.0)));
    if (var <= 0) return 1.0; // all values identical
    double u = uStatistic(a, b);
    double z = (std::fabs(u - mu) - 0.5) / std::sqrt(var);
    if (z < 0) z = 0;
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

} // namespace detail

// Final-coverage comparison of two sets of runs. Exact permutation test up
// to 20 pooled runs, normal approximation beyond.
inline StatsReport compareSamples(const std::vector<double>& a,
                                  const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw InsufficientData("need at least 2 runs per side");
    StatsReport r;
    r.nA = static_cast<int>(a.size());
    r.nB = static_cast<int>(b.size());
    for (double x : a) r.meanA += x;
    for (double x : b) r.meanB += x;
    r.meanA /= r.nA;
    r.meanB /= r.nB;
    r.a12 = varghaDelaneyA12(a, b);
    if (a.size() + b.size() <= 20)
        r.pValue = detail::exactMannWhitneyP(a, b);
    else
        r.pValue = detail::approxMannWhitneyP(a, b);
    return r;
}

inline StatsReport compareCampaigns(const std::vector<CampaignLog>& a,
                                    const std::vector<CampaignLog>& b) {
    std::vector<double> fa, fb;
    for (const auto& log : a) fa.push_back(log.finalCoverageRatio());
    for (const auto& log : b) fb.push_back(log.finalCoverageRatio());
    return compareSamples(fa, fb);
}

} // namespace blockevo
