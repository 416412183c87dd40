#pragma once

// Canonical JSON emission for artifacts: object keys sorted (std::map),
// doubles printed as %.12e, non-finite doubles as the strings "inf",
// "-inf", "nan", two-space indentation, LF line endings.  Identical inputs
// produce byte-identical output on every platform.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace varcert {

class JsonValue {
public:
    using Array = std::vector<JsonValue>;
    using Object = std::map<std::string, JsonValue>;

    JsonValue() : v_(nullptr) {}
    JsonValue(std::nullptr_t) : v_(nullptr) {}
    JsonValue(bool b) : v_(b) {}
    JsonValue(int i) : v_(static_cast<std::int64_t>(i)) {}
    JsonValue(std::int64_t i) : v_(i) {}
    JsonValue(std::size_t i) : v_(static_cast<std::int64_t>(i)) {}
    JsonValue(double d) : v_(d) {}
    JsonValue(const char* s) : v_(std::string(s)) {}
    JsonValue(std::string s) : v_(std::move(s)) {}
    JsonValue(Array a) : v_(std::move(a)) {}
    JsonValue(Object o) : v_(std::move(o)) {}

    static JsonValue object() { return JsonValue(Object{}); }
    static JsonValue array() { return JsonValue(Array{}); }

    JsonValue& operator[](const std::string& key) {
        if (!std::holds_alternative<Object>(v_)) v_ = Object{};
        return std::get<Object>(v_)[key];
    }

    void push_back(JsonValue v) {
        if (!std::holds_alternative<Array>(v_)) v_ = Array{};
        std::get<Array>(v_).push_back(std::move(v));
    }

    /// Render with two-space indentation and sorted keys; no trailing newline.
    std::string dump() const {
        std::string out;
        write(out, 0);
        return out;
    }

private:
    std::variant<std::nullptr_t, bool, std::int64_t, double, std::string, Array, Object> v_;

    static void write_escaped(std::string& out, const std::string& s) {
        out += '"';
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\r': out += "\\r"; break;
                case '\t': out += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        out += buf;
                    } else {
                        out += c;
                    }
            }
        }
        out += '"';
    }

    static void write_double(std::string& out, double d) {
        if (std::isnan(d)) {
            out += "\"nan\"";
        } else if (std::isinf(d)) {
            out += d > 0 ? "\"inf\"" : "\"-inf\"";
        } else {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.12e", d);
            out += buf;
        }
    }

    void write(std::string& out, int depth) const {
        const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
        const std::string pad_in(static_cast<std::size_t>(depth + 1) * 2, ' ');
        if (std::holds_alternative<std::nullptr_t>(v_)) {
            out += "null";
        } else if (std::holds_alternative<bool>(v_)) {
            out += std::get<bool>(v_) ? "true" : "false";
        } else if (std::holds_alternative<std::int64_t>(v_)) {
            out += std::to_string(std::get<std::int64_t>(v_));
        } else if (std::holds_alternative<double>(v_)) {
            write_double(out, std::get<double>(v_));
        } else if (std::holds_alternative<std::string>(v_)) {
            write_escaped(out, std::get<std::string>(v_));
        } else if (std::holds_alternative<Array>(v_)) {
            const Array& a = std::get<Array>(v_);
            if (a.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < a.size(); ++i) {
                out += pad_in;
                a[i].write(out, depth + 1);
                if (i + 1 < a.size()) out += ',';
                out += '\n';
            }
            out += pad + "]";
        } else {
            const Object& o = std::get<Object>(v_);
            if (o.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            std::size_t i = 0;
            for (const auto& [k, val] : o) {
                out += pad_in;
                write_escaped(out, k);
                out += ": ";
                val.write(out, depth + 1);
                if (++i < o.size()) out += ',';
                out += '\n';
            }
            out += pad + "}";
        }
    }
};

}  // namespace varcert
