#ifndef EPITRACE_CSV_HPP
#define EPITRACE_CSV_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace epitrace::csv {

/// Line-oriented reader for the plain comma-separated files used throughout
/// (no quoting). Row numbers are 1-based and include the header.
class Reader
{
public:
    explicit Reader(const std::filesystem::path& file);

    /// Throws ParseError unless the header matches exactly (whitespace-trimmed).
    void expect_header(std::initializer_list<std::string_view> columns);

    /// Advances to the next non-blank row; false at end of file.
    bool next();

    std::size_t row() const { return row_; }
    std::size_t columns() const { return fields_.size(); }
    const std::string& source() const { return source_; }

    std::string_view field(std::size_t k) const;
    bool empty(std::size_t k) const { return field(k).empty(); }

    double as_double(std::size_t k) const;
    /// Empty fields read as +inf (censored/unknown).
    double as_time(std::size_t k) const;
    std::int64_t as_int(std::size_t k) const;

    [[noreturn]] void fail(const std::string& what) const;
    void require_columns(std::size_t n) const;

private:
    std::ifstream in_;
    std::string source_;
    std::string line_;
    std::vector<std::string_view> fields_;
    std::size_t row_ = 0;
};

/// Shortest round-trip decimal representation; infinities as `inf`.
std::string format(double v);
std::string format(std::int64_t v);

/// Opens an output file, throwing Error with the path on failure.
std::ofstream open_output(const std::filesystem::path& file);

} // namespace epitrace::csv

#endif // EPITRACE_CSV_HPP
