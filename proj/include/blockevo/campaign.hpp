#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockevo {

// Coverage-over-time record, one row per evaluation (or per injected event
// for the random baseline). elapsed_ms is virtual time.
struct CampaignLog {
    struct Row {
        double elapsedMs = 0;
        int64_t evaluations = 0;
        int covered = 0;
        int total = 0;
    };
    std::vector<Row> rows;
    int totalTargets = 0;

    int finalCovered() const { return rows.empty() ? 0 : rows.back().covered; }
    bool fullCoverage() const {
        return totalTargets > 0 && finalCovered() == totalTargets;
    }
    double finalCoverageRatio() const {
        if (totalTargets == 0) return 1.0;
        return static_cast<double>(finalCovered()) / totalTargets;
    }

    std::string toCsv() const {
        std::ostringstream os;
        os << "elapsed_ms,evaluations,covered,total\n";
        for (const auto& r : rows) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.3f,%lld,%d,%d\n", r.elapsedMs,
                          static_cast<long long>(r.evaluations), r.covered, r.total);
            os << buf;
        }
        return os.str();
    }

    static CampaignLog fromCsv(const std::string& text) {
        CampaignLog log;
        std::istringstream is(text);
        std::string line;
        bool header = true;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            if (header) { header = false; continue; }
            Row r;
            long long evals = 0;
            if (std::sscanf(line.c_str(), "%lf,%lld,%d,%d", &r.elapsedMs, &evals,
                            &r.covered, &r.total) != 4)
                throw std::runtime_error("bad campaign csv row: " + line);
            r.evaluations = evals;
            log.rows.push_back(r);
            log.totalTargets = r.total;
        }
        return log;
    }
};

} // namespace blockevo
