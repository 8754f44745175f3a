#include "epitrace/csv.hpp"

#include "epitrace/errors.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace epitrace::csv {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

Reader::Reader(const std::filesystem::path& file) : in_(file), source_(file.string())
{
    if (!in_)
        throw InputError("cannot open " + source_);
}

void Reader::expect_header(std::initializer_list<std::string_view> columns)
{
    if (!next())
        throw ParseError(source_, 1, "missing header");
    bool ok = fields_.size() == columns.size();
    std::size_t k = 0;
    for (auto c : columns) {
        if (!ok)
            break;
        ok = fields_[k++] == c;
    }
    if (!ok) {
        std::string want;
        for (auto c : columns)
            want += (want.empty() ? "" : ",") + std::string(c);
        fail("expected header '" + want + "'");
    }
}

bool Reader::next()
{
    while (std::getline(in_, line_)) {
        ++row_;
        std::string_view rest = trim(line_);
        if (rest.empty())
            continue;
        fields_.clear();
        for (;;) {
            auto comma = rest.find(',');
            fields_.push_back(trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        return true;
    }
    return false;
}

std::string_view Reader::field(std::size_t k) const
{
    require_columns(k + 1);
    return fields_[k];
}

void Reader::require_columns(std::size_t n) const
{
    if (fields_.size() < n)
        fail("expected " + std::to_string(n) + " columns, found " + std::to_string(fields_.size()));
}

double Reader::as_double(std::size_t k) const
{
    auto f = field(k);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || std::isnan(v))
        fail("column " + std::to_string(k + 1) + ": not a number: '" + std::string(f) + "'");
    return v;
}

double Reader::as_time(std::size_t k) const
{
    if (field(k).empty())
        return std::numeric_limits<double>::infinity();
    return as_double(k);
}

std::int64_t Reader::as_int(std::size_t k) const
{
    auto f = field(k);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
        fail("column " + std::to_string(k + 1) + ": not an integer: '" + std::string(f) + "'");
    return v;
}

void Reader::fail(const std::string& what) const
{
    throw ParseError(source_, row_, what);
}

std::string format(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format(std::int64_t v)
{
    return std::to_string(v);
}

std::ofstream open_output(const std::filesystem::path& file)
{
    std::ofstream out(file, std::ios::binary);
    if (!out)
        throw Error("cannot write " + file.string());
    return out;
}

} // namespace epitrace::csv
