#ifndef BFLAB_TRANSPORT_CSV_HPP
#define BFLAB_TRANSPORT_CSV_HPP

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/grid.hpp"

namespace bflab::transport {

/// Two-column sampled density: coordinate, density. The coordinates must be
/// uniformly spaced and increasing.
struct DensityTable
{
    std::vector< std::string > header;
    std::vector< double > coordinate;
    std::vector< double > density;

    corenum::Grid1D grid() const
    {
        return corenum::Grid1D(coordinate.front(), coordinate.back(), coordinate.size());
    }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector< std::string_view > split_commas(std::string_view line)
{
    std::vector< std::string_view > out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_number(std::string_view s, double& out)
{
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

} // namespace detail

/// Parses CSV text (comma separated, dot decimal, mandatory header row).
inline DensityTable parse_density_csv(std::istream& in, const std::string& source = "<csv>")
{
    DensityTable t;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto fields = detail::split_commas(line);
        if (fields.size() != 2)
            throw ParseError(source, "expected 2 comma-separated columns, found " + std::to_string(fields.size()),
                             line_no);
        if (!have_header) {
            double probe = 0.0;
            if (detail::parse_number(fields[0], probe))
                throw ParseError(source, "missing header row", line_no);
            t.header = {std::string(fields[0]), std::string(fields[1])};
            have_header = true;
            continue;
        }
        double c = 0.0;
        double d = 0.0;
        if (!detail::parse_number(fields[0], c))
            throw ParseError(source, "coordinate is not a finite number", line_no);
        if (!detail::parse_number(fields[1], d))
            throw ParseError(source, "density is not a finite number", line_no);
        if (d < 0.0)
            throw ParseError(source, "density must be non-negative", line_no);
        t.coordinate.push_back(c);
        t.density.push_back(d);
    }
    if (!have_header)
        throw ParseError(source, "empty file");
    if (t.coordinate.size() < 2)
        throw ParseError(source, "need at least two data rows");
    const double step = (t.coordinate.back() - t.coordinate.front()) / static_cast< double >(t.coordinate.size() - 1);
    if (!(step > 0.0))
        throw ParseError(source, "coordinates must increase");
    for (std::size_t i = 1; i < t.coordinate.size(); ++i) {
        const double d = t.coordinate[i] - t.coordinate[i - 1];
        if (std::abs(d - step) > 1e-6 * step)
            throw ParseError(source, "coordinates must be uniformly spaced", static_cast< int >(i) + 2);
    }
    return t;
}

inline DensityTable read_density_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    return parse_density_csv(in, path.string());
}

inline void write_density_csv(std::ostream& out, std::string_view coord_name, std::string_view density_name,
                              const std::vector< double >& coordinate, const std::vector< double >& density)
{
    out << coord_name << ',' << density_name << '\n';
    char buf[64];
    for (std::size_t i = 0; i < coordinate.size(); ++i) {
        auto r = std::to_chars(buf, buf + sizeof buf, coordinate[i]);
        out.write(buf, r.ptr - buf);
        out << ',';
        r = std::to_chars(buf, buf + sizeof buf, density[i]);
        out.write(buf, r.ptr - buf);
        out << '\n';
    }
}

} // namespace bflab::transport

#endif // BFLAB_TRANSPORT_CSV_HPP
