#ifndef JUMPRES_SERIES_IO_HPP
#define JUMPRES_SERIES_IO_HPP

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jumpres/calibration.hpp"
#include "jumpres/errors.hpp"

namespace jumpres {

namespace detail {

/// Days since 1970-01-01 of a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Parse "YYYY-MM-DD[T ]HH:MM[:SS][Z]" into hours since epoch. Minutes and
/// seconds must be zero: the calibration grid is hourly.
inline std::int64_t parse_iso_hour(const std::string& s, std::size_t line_no) {
    int y, mo, d, hh, mi = 0, se = 0;
    char sep;
    const int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &hh, &mi, &se);
    if (got < 6 || (sep != 'T' && sep != ' '))
        throw ParseError("bad timestamp '" + s + "' at line " + std::to_string(line_no), line_no);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mi != 0 || se != 0)
        throw ParseError("timestamp '" + s + "' is not on the hourly grid at line " +
                             std::to_string(line_no),
                         line_no);
    return days_from_civil(y, mo, d) * 24 + hh;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back())))
            field.pop_back();
        std::size_t b = 0;
        while (b < field.size() && std::isspace(static_cast<unsigned char>(field[b]))) ++b;
        out.push_back(field.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

/// Load an hourly operation CSV with header
///   timestamp,inflow_m3s[,outflow_m3s][,volume_m3]
/// Timestamps are ISO-8601 on the hour and must be strictly increasing;
/// discharges must be nonnegative. Volume is converted from m3 into the
/// solver's scaled unit (divide by 3600) on load.
inline HourlySeries load_series(std::istream& is) {
    HourlySeries series;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line)) throw ParseError("empty file", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    if (header.empty() || header[0] != "timestamp" || header.size() < 2 ||
        header[1] != "inflow_m3s")
        throw ParseError("header must start with 'timestamp,inflow_m3s'", line_no);
    int col_outflow = -1, col_volume = -1;
    for (std::size_t c = 2; c < header.size(); ++c) {
        if (header[c] == "outflow_m3s") col_outflow = static_cast<int>(c);
        else if (header[c] == "volume_m3") col_volume = static_cast<int>(c);
        else throw ParseError("unknown column '" + header[c] + "'", line_no);
    }
    series.has_outflow = col_outflow >= 0;
    series.has_volume = col_volume >= 0;

    auto parse_double = [&](const std::string& s, std::size_t ln) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ParseError("bad number '" + s + "' at line " + std::to_string(ln), ln);
        }
    };

    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields at line " +
                                 std::to_string(line_no),
                             line_no);
        const std::int64_t stamp = detail::parse_iso_hour(fields[0], line_no);
        if (!series.t.empty() && stamp <= series.t.back())
            throw NonMonotoneTime("timestamps must be strictly increasing (line " +
                                      std::to_string(line_no) + ")",
                                  line_no);
        const double inflow = parse_double(fields[1], line_no);
        if (inflow < 0.0)
            throw NegativeDischarge("negative inflow at line " + std::to_string(line_no),
                                    line_no);
        double outflow = 0.0, volume = 0.0;
        if (col_outflow >= 0) {
            outflow = parse_double(fields[static_cast<std::size_t>(col_outflow)], line_no);
            if (outflow < 0.0)
                throw NegativeDischarge("negative outflow at line " + std::to_string(line_no),
                                        line_no);
        }
        if (col_volume >= 0)
            volume = parse_double(fields[static_cast<std::size_t>(col_volume)], line_no) / 3600.0;
        series.t.push_back(stamp);
        series.inflow.push_back(inflow);
        if (col_outflow >= 0) series.outflow.push_back(outflow);
        if (col_volume >= 0) series.volume.push_back(volume);
    }
    series.rebuild_segments();
    return series;
}

inline HourlySeries load_series(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    return load_series(is);
}

}  // namespace jumpres

#endif
