#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "blockevo/search.hpp"

namespace blockevo {

inline nlohmann::json suiteToJson(const TestSuite& suite) {
    nlohmann::json j;
    j["config"] = {{"stepDurationMs", suite.stepConfig.stepDurationMs},
                   {"accelerationFactor", suite.stepConfig.accelerationFactor}};
    j["targets"] = suite.targetIds;
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : suite.tests) {
        nlohmann::json tj;
        nlohmann::json evs = nlohmann::json::array();
        for (const auto& e : t.events) evs.push_back(e.toJson());
        tj["events"] = evs;
        tj["coversBlockIds"] = t.coversBlockIds;
        tj["seed"] = t.seed;
        tests.push_back(tj);
    }
    j["tests"] = tests;
    return j;
}

inline TestSuite suiteFromJson(const nlohmann::json& j) {
    TestSuite suite;
    if (j.contains("config")) {
        suite.stepConfig.stepDurationMs =
            j["config"].value("stepDurationMs", kDefaultStepMs);
        suite.stepConfig.accelerationFactor =
            j["config"].value("accelerationFactor", 1.0);
    }
    for (const auto& id : j.value("targets", nlohmann::json::array()))
        suite.targetIds.push_back(id.get<BlockId>());
    for (const auto& tj : j.value("tests", nlohmann::json::array())) {
        SuiteTest t;
        for (const auto& ej : tj.value("events", nlohmann::json::array()))
            t.events.push_back(EventDescriptor::fromJson(ej));
        for (const auto& id : tj.value("coversBlockIds", nlohmann::json::array()))
            t.coversBlockIds.push_back(id.get<BlockId>());
        t.seed = tj.value("seed", 0ULL);
        suite.tests.push_back(std::move(t));
        for (BlockId id : suite.tests.back().coversBlockIds) suite.coveredUnion.insert(id);
    }
    return suite;
}

// One JSON line per step: {clock, executed:[ids], branches:{id:[dT,dF]}}.
// Branch minima are the running values at the end of the run.
inline std::string traceToJsonLines(const ExecutionTrace& trace) {
    std::ostringstream os;
    for (const auto& step : trace.perStep) {
        nlohmann::json j;
        j["clock"] = step.clockMs;
        j["executed"] = step.executed;
        os << j.dump() << "\n";
    }
    nlohmann::json branches = nlohmann::json::object();
    for (const auto& [id, rec] : trace.branchRecords) {
        double t = std::isinf(rec.minTrue) ? -1.0 : rec.minTrue;
        double f = std::isinf(rec.minFalse) ? -1.0 : rec.minFalse;
        branches[std::to_string(id)] = nlohmann::json::array({t, f});
    }
    nlohmann::json summary;
    summary["branches"] = branches;
    os << summary.dump() << "\n";
    return os.str();
}

inline std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void writeFile(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// Coverage-over-time SVG chart
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::string label;
    std::string color;
    const CampaignLog* log = nullptr;
};

inline std::string coverageChartSvg(const std::vector<SvgSeries>& series,
                                    double budgetMs) {
    const int W = 640, H = 400, ml = 60, mr = 20, mt = 30, mb = 45;
    const double plotW = W - ml - mr, plotH = H - mt - mb;
    double maxX = budgetMs;
    for (const auto& s : series)
        if (s.log && !s.log->rows.empty())
            maxX = std::max(maxX, s.log->rows.back().elapsedMs);
    if (maxX <= 0) maxX = 1;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
       << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + plotH << "\" x2=\"" << ml + plotW
       << "\" y2=\"" << mt + plotH << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
       << mt + plotH << "\" stroke=\"black\"/>\n";
    for (int pct = 0; pct <= 100; pct += 25) {
        double y = mt + plotH - plotH * pct / 100.0;
        os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << pct << "%</text>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plotW
           << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        double x = ml + plotW * i / 4.0;
        os << "<text x=\"" << x << "\" y=\"" << mt + plotH + 18
           << "\" font-size=\"11\" text-anchor=\"middle\">"
           << Value::formatNumber(maxX * i / 4.0 / 1000.0) << "s</text>\n";
    }
    os << "<text x=\"" << ml + plotW / 2 << "\" y=\"" << H - 8
       << "\" font-size=\"12\" text-anchor=\"middle\">virtual time</text>\n";
    os << "<text x=\"" << ml + plotW / 2 << "\" y=\"18\" font-size=\"13\" "
          "text-anchor=\"middle\">statement coverage over time</text>\n";

    int legendY = mt + 12;
    for (const auto& s : series) {
        if (!s.log) continue;
        os << "<polyline fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.5\" points=\"";
        double prevY = mt + plotH;
        os << ml << "," << prevY << " ";
        for (const auto& r : s.log->rows) {
            double x = ml + plotW * (r.elapsedMs / maxX);
            double frac = r.total > 0 ? static_cast<double>(r.covered) / r.total : 1.0;
            double y = mt + plotH - plotH * frac;
            os << x << "," << prevY << " " << x << "," << y << " ";
            prevY = y;
        }
        os << "\"/>\n";
        os << "<text x=\"" << ml + plotW - 6 << "\" y=\"" << legendY
           << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << s.color << "\">"
           << s.label << "</text>\n";
        legendY += 16;
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace blockevo
