#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace lorentz {

/// Shortest decimal that round-trips to the same double; '.' separator
/// regardless of locale. Non-finite values print as inf, -inf, nan.
std::string format_number(double x);
std::string format_number(std::uint64_t x);
std::string format_number(std::int64_t x);
inline std::string format_number(int x) { return format_number(static_cast<std::int64_t>(x)); }

/// A CSV table held as formatted cells.
struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    [[nodiscard]] std::string to_csv() const;
};

}  // namespace lorentz
