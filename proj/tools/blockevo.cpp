// blockevo - search-based test-suite generation for event-driven block
// programs. Subcommands: generate, random, run, cfg, compare.

#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blockevo/cfg.hpp"
#include "blockevo/harness.hpp"
#include "blockevo/search.hpp"
#include "blockevo/suite_io.hpp"

namespace fs = std::filesystem;
using namespace blockevo;

namespace {

struct CommonOpts {
    std::string programPath;
    std::string configPath;
    std::string outDir = ".";
    uint64_t seed = 0;
    double accel = 1.0;
    double stepMs = kDefaultStepMs;
};

Program loadProgram(const std::string& path) {
    return parseProgram(readFile(path));
}

// Config file (JSON) fills any option the command line left untouched.
void applyConfigFile(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    nlohmann::json cfg = nlohmann::json::parse(readFile(path));
    for (auto* opt : cmd->get_options()) {
        if (opt->count() > 0) continue; // flags win over the config file
        std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames()[0];
        if (name.empty() || !cfg.contains(name)) continue;
        const auto& v = cfg.at(name);
        std::string text = v.is_string() ? v.get<std::string>() : v.dump();
        opt->add_result(text);
        opt->run_callback();
    }
}

StepConfig makeStepConfig(const CommonOpts& c) {
    StepConfig s;
    s.stepDurationMs = c.stepMs;
    s.accelerationFactor = c.accel;
    return s;
}

int runJobs(int jobs, int runs, const std::function<void(int)>& fn) {
    if (jobs <= 1) {
        for (int i = 0; i < runs; ++i) fn(i);
        return 0;
    }
    std::vector<std::future<void>> pending;
    int next = 0;
    while (next < runs || !pending.empty()) {
        while (static_cast<int>(pending.size()) < jobs && next < runs)
            pending.push_back(std::async(std::launch::async, fn, next++));
        pending.front().get();
        pending.erase(pending.begin());
    }
    return 0;
}

std::vector<CampaignLog> loadCampaignDir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CampaignLog> logs;
    for (const auto& f : files) logs.push_back(CampaignLog::fromCsv(readFile(f.string())));
    if (logs.empty()) throw std::runtime_error("no .csv campaign logs in " + dir);
    return logs;
}

// Step-function mean of many coverage curves on a fixed grid, for the
// comparison chart.
CampaignLog meanCurve(const std::vector<CampaignLog>& logs, double budgetMs) {
    CampaignLog mean;
    if (logs.empty()) return mean;
    mean.totalTargets = 1000;
    const int kPoints = 200;
    for (int i = 1; i <= kPoints; ++i) {
        double t = budgetMs * i / kPoints;
        double acc = 0;
        for (const auto& log : logs) {
            double frac = 0;
            for (const auto& r : log.rows) {
                if (r.elapsedMs > t) break;
                frac = r.total > 0 ? static_cast<double>(r.covered) / r.total : 1.0;
            }
            acc += frac;
        }
        double avg = acc / static_cast<double>(logs.size());
        mean.rows.push_back({t, i, static_cast<int>(avg * 1000.0), 1000});
    }
    return mean;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"search-based test generation for event-driven block programs"};
    app.require_subcommand(1);

    // ---- generate ----------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "evolve a coverage test suite");
    CommonOpts gc;
    double gBudgetMs = 60000;
    int64_t gBudgetEvals = -1, gBudgetGens = -1;
    int gPopulation = 10, gMaxLength = 50, gInitialLength = 2, gJobs = 1, gRuns = 1;
    double gCrossover = 0.8;
    std::string gSvg, gDot;
    gen->add_option("--program", gc.programPath, "program JSON file")->required();
    gen->add_option("--config", gc.configPath, "JSON config file (flags win)");
    gen->add_option("--budget-ms", gBudgetMs, "virtual-time budget per run");
    gen->add_option("--budget-evals", gBudgetEvals, "evaluation budget");
    gen->add_option("--budget-gens", gBudgetGens, "generation budget");
    gen->add_option("--seed", gc.seed, "master seed");
    gen->add_option("--accel", gc.accel, "acceleration factor");
    gen->add_option("--step-ms", gc.stepMs, "virtual step duration (ms)");
    gen->add_option("--population", gPopulation, "population size");
    gen->add_option("--crossover", gCrossover, "crossover probability");
    gen->add_option("--initial-length", gInitialLength, "initial chromosome length");
    gen->add_option("--max-length", gMaxLength, "chromosome length cap");
    gen->add_option("--jobs", gJobs, "parallel independent runs");
    gen->add_option("--runs", gRuns, "number of seeded runs");
    gen->add_option("--out-dir", gc.outDir, "output directory");
    gen->add_option("--svg", gSvg, "write coverage-over-time chart");

    // ---- random ------------------------------------------------------------
    auto* rnd = app.add_subcommand("random", "random-testing baseline campaign");
    CommonOpts rc;
    double rBudgetMs = 60000, rEventMs = 250, rResetMs = 10000;
    int rJobs = 1, rRuns = 1;
    std::string rSvg;
    rnd->add_option("--program", rc.programPath, "program JSON file")->required();
    rnd->add_option("--config", rc.configPath, "JSON config file (flags win)");
    rnd->add_option("--budget-ms", rBudgetMs, "virtual-time budget per run");
    rnd->add_option("--seed", rc.seed, "master seed");
    rnd->add_option("--accel", rc.accel, "acceleration factor");
    rnd->add_option("--step-ms", rc.stepMs, "virtual step duration (ms)");
    rnd->add_option("--event-interval-ms", rEventMs, "interval between events");
    rnd->add_option("--reset-interval-ms", rResetMs, "interval between resets");
    rnd->add_option("--jobs", rJobs, "parallel independent runs");
    rnd->add_option("--runs", rRuns, "number of seeded runs");
    rnd->add_option("--out-dir", rc.outDir, "output directory");
    rnd->add_option("--svg", rSvg, "write coverage-over-time chart");

    // ---- run ---------------------------------------------------------------
    auto* rep = app.add_subcommand("run", "replay a saved suite and check coverage");
    CommonOpts pc;
    std::string suitePath;
    rep->add_option("--program", pc.programPath, "program JSON file")->required();
    rep->add_option("--suite", suitePath, "suite JSON file")->required();

    // ---- cfg ---------------------------------------------------------------
    auto* cfgCmd = app.add_subcommand("cfg", "emit the interprocedural super-CFG");
    CommonOpts cc;
    std::string dotPath;
    cfgCmd->add_option("--program", cc.programPath, "program JSON file")->required();
    cfgCmd->add_option("--dot", dotPath, "write Graphviz dot here (default stdout)");

    // ---- compare -----------------------------------------------------------
    auto* cmp = app.add_subcommand("compare", "A12 + Mann-Whitney over two run sets");
    std::string cmpA, cmpB, cmpSvg;
    double cmpBudgetMs = 60000;
    cmp->add_option("--a", cmpA, "directory of campaign CSVs (side A)")->required();
    cmp->add_option("--b", cmpB, "directory of campaign CSVs (side B)")->required();
    cmp->add_option("--svg", cmpSvg, "write mean coverage chart");
    cmp->add_option("--budget-ms", cmpBudgetMs, "chart time axis length");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            applyConfigFile(gen, gc.configPath);
            Program program = loadProgram(gc.programPath);
            StepConfig stepCfg = makeStepConfig(gc);
            fs::create_directories(gc.outDir);
            std::vector<GenerateResult> results(gRuns);
            runJobs(gJobs, gRuns, [&](int i) {
                SearchConfig sc;
                sc.populationSize = gPopulation;
                sc.crossoverProbability = gCrossover;
                sc.initialLength = gInitialLength;
                sc.maxLength = gMaxLength;
                sc.budget.maxWallMs = gBudgetMs;
                sc.budget.maxEvaluations = gBudgetEvals;
                sc.budget.maxGenerations = gBudgetGens;
                sc.seed = gc.seed + static_cast<uint64_t>(i);
                results[i] = generateSuite(program, sc, stepCfg);
            });
            for (int i = 0; i < gRuns; ++i) {
                std::string tag = gRuns == 1 ? "" : "_" + std::to_string(i);
                fs::path suiteFile = fs::path(gc.outDir) / ("suite" + tag + ".json");
                fs::path csvFile = fs::path(gc.outDir) / ("campaign" + tag + ".csv");
                writeFile(suiteFile.string(), suiteToJson(results[i].suite).dump(2) + "\n");
                writeFile(csvFile.string(), results[i].log.toCsv());
                std::cout << "run " << i << ": covered " << results[i].coveredCount << "/"
                          << results[i].targetCount << " targets, "
                          << results[i].suite.tests.size() << " tests, "
                          << results[i].log.rows.size() << " evaluations\n";
            }
            if (!gSvg.empty()) {
                SvgSeries s{"search", "#1f77b4", &results[0].log};
                writeFile(gSvg, coverageChartSvg({s}, gBudgetMs));
            }
            return 0;
        }

        if (rnd->parsed()) {
            applyConfigFile(rnd, rc.configPath);
            Program program = loadProgram(rc.programPath);
            StepConfig stepCfg = makeStepConfig(rc);
            RandomConfig rcfg;
            rcfg.budgetMs = rBudgetMs;
            rcfg.eventIntervalMs = rEventMs;
            rcfg.resetIntervalMs = rResetMs;
            fs::create_directories(rc.outDir);
            std::vector<CampaignLog> logs(rRuns);
            runJobs(rJobs, rRuns, [&](int i) {
                logs[i] = randomCampaign(program, stepCfg, rcfg,
                                         rc.seed + static_cast<uint64_t>(i));
            });
            for (int i = 0; i < rRuns; ++i) {
                std::string tag = rRuns == 1 ? "" : "_" + std::to_string(i);
                fs::path csvFile = fs::path(rc.outDir) / ("campaign" + tag + ".csv");
                writeFile(csvFile.string(), logs[i].toCsv());
                std::cout << "run " << i << ": covered " << logs[i].finalCovered() << "/"
                          << logs[i].totalTargets << " targets\n";
            }
            if (!rSvg.empty()) {
                SvgSeries s{"random", "#d62728", &logs[0]};
                writeFile(rSvg, coverageChartSvg({s}, rBudgetMs));
            }
            return 0;
        }

        if (rep->parsed()) {
            Program program = loadProgram(pc.programPath);
            nlohmann::json j = nlohmann::json::parse(readFile(suitePath));
            TestSuite suite = suiteFromJson(j);
            std::set<BlockId> replayed;
            for (const auto& t : suite.tests) {
                ExecutionTrace trace =
                    runTest(program, suite.stepConfig, t.seed, t.events);
                for (BlockId id : trace.executedBlockIds)
                    if (std::find(suite.targetIds.begin(), suite.targetIds.end(), id) !=
                        suite.targetIds.end())
                        replayed.insert(id);
            }
            std::cout << "replayed coverage: " << replayed.size() << "/"
                      << suite.targetIds.size() << " (recorded "
                      << suite.coveredUnion.size() << ")\n";
            if (replayed == suite.coveredUnion) {
                std::cout << "coverage matches recorded suite\n";
                return 0;
            }
            std::cout << "coverage MISMATCH\n";
            return 1;
        }

        if (cfgCmd->parsed()) {
            Program program = loadProgram(cc.programPath);
            Cfg cfg = buildSuperCfg(program);
            std::string dot = cfg.toDot();
            if (dotPath.empty()) std::cout << dot;
            else writeFile(dotPath, dot);
            return 0;
        }

        if (cmp->parsed()) {
            std::vector<CampaignLog> a = loadCampaignDir(cmpA);
            std::vector<CampaignLog> b = loadCampaignDir(cmpB);
            StatsReport report = compareCampaigns(a, b);
            std::cout << report.toJson().dump(2) << "\n";
            if (!cmpSvg.empty()) {
                CampaignLog ma = meanCurve(a, cmpBudgetMs);
                CampaignLog mb = meanCurve(b, cmpBudgetMs);
                SvgSeries sa{"A", "#1f77b4", &ma};
                SvgSeries sb{"B", "#d62728", &mb};
                writeFile(cmpSvg, coverageChartSvg({sa, sb}, cmpBudgetMs));
            }
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
