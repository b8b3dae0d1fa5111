#include "eqreins/csv.hpp"

#include <cstdio>

namespace eqreins {

std::string format_double(double x) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

void CsvWriter::header(std::initializer_list<std::string_view> columns) {
    for (auto c : columns) field(c);
    end_row();
}

void CsvWriter::sep() {
    if (!first_) out_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::field(double x) {
    sep();
    out_ << format_double(x);
    return *this;
}

CsvWriter& CsvWriter::field(std::size_t x) {
    sep();
    out_ << x;
    return *this;
}

CsvWriter& CsvWriter::field(std::string_view s) {
    sep();
    out_ << s;
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

}  // namespace eqreins
