#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

namespace blockevo {

// Scalar runtime value. Blocks exchange numbers, strings and booleans;
// coercions follow the usual block-language rules (non-numeric strings
// coerce to 0, booleans to 0/1).
class Value {
public:
    Value() : data_(0.0) {}
    Value(double v) : data_(v) {}
    Value(int v) : data_(static_cast<double>(v)) {}
    Value(bool v) : data_(v) {}
    Value(std::string v) : data_(std::move(v)) {}
    Value(const char* v) : data_(std::string(v)) {}

    bool isNumber() const { return std::holds_alternative<double>(data_); }
    bool isString() const { return std::holds_alternative<std::string>(data_); }
    bool isBool() const { return std::holds_alternative<bool>(data_); }

    double asNumber() const {
        if (isNumber()) return std::get<double>(data_);
        if (isBool()) return std::get<bool>(data_) ? 1.0 : 0.0;
        return parseNumber(std::get<std::string>(data_));
    }

    bool asBool() const {
        if (isBool()) return std::get<bool>(data_);
        if (isNumber()) return std::get<double>(data_) != 0.0;
        const std::string& s = std::get<std::string>(data_);
        return !(s.empty() || s == "0" || s == "false");
    }

    std::string asString() const {
        if (isString()) return std::get<std::string>(data_);
        if (isBool()) return std::get<bool>(data_) ? "true" : "false";
        return formatNumber(std::get<double>(data_));
    }

    // True when the value can participate in numeric comparison without
    // falling back to the string path.
    bool isNumericLike() const {
        if (isNumber() || isBool()) return true;
        const std::string& s = std::get<std::string>(data_);
        if (s.empty()) return false;
        char* end = nullptr;
        std::strtod(s.c_str(), &end);
        while (end && *end == ' ') ++end;
        return end && *end == '\0';
    }

    bool operator==(const Value& other) const { return data_ == other.data_; }

    static std::string formatNumber(double v) {
        if (std::isnan(v)) return "NaN";
        if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
        if (v == std::floor(v) && std::fabs(v) < 1e15) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.0f", v);
            return buf;
        }
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        // shortest representation that round-trips
        for (int prec = 1; prec <= 17; ++prec) {
            char cand[40];
            std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
            if (std::strtod(cand, nullptr) == v) return cand;
        }
        return buf;
    }

    static double parseNumber(const std::string& s) {
        if (s.empty()) return 0.0;
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str()) return 0.0;
        while (*end == ' ') ++end;
        if (*end != '\0') return 0.0;
        return v;
    }

private:
    std::variant<double, std::string, bool> data_;
};

} // namespace blockevo
