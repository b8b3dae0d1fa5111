#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace eqreins {

/// Shortest-stable rendering used in every exported file: 17 significant digits.
std::string format_double(double x);

/// Minimal comma-separated writer: LF line endings, no quoting (no field
/// produced by this library contains a comma).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(std::initializer_list<std::string_view> columns);

    CsvWriter& field(double x);
    CsvWriter& field(std::size_t x);
    CsvWriter& field(std::string_view s);
    void end_row();

private:
    void sep();

    std::ostream& out_;
    bool first_ = true;
};

}  // namespace eqreins
