#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msmap/io.hpp"

namespace msmap {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
        out << content;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw Error(ErrorKind::InvalidArgument, "failed writing '" + path + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_table(const FeatureTable& table, const std::string& path) {
    std::ostringstream out;
    out << kTableHeader << '\n';
    for (const FeatureRow& r : table.rows) {
        if (r.subject.find_first_of(",\n\"") != std::string::npos)
            throw_invalid("subject id must not contain commas, quotes or newlines");
        out << r.subject << ',' << r.i << ',' << r.j << ',' << r.k << ',' << label_char(r.label);
        for (double f : r.features) out << ',' << format_double(f);
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

FeatureTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InputFormat, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::InputFormat, "'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTableHeader)
        throw Error(ErrorKind::InputFormat, "'" + path + "': unexpected header (expected '" + std::string(kTableHeader) + "')");

    FeatureTable table;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        const std::string where = path + ":" + std::to_string(lineno) + ": ";
        if (fields.size() != 10) throw Error(ErrorKind::InputFormat, where + "expected 10 fields, found " + std::to_string(fields.size()));
        FeatureRow row;
        row.subject = fields[0];
        try {
            std::size_t used = 0;
            row.i = std::stoul(fields[1], &used);
            row.j = std::stoul(fields[2], &used);
            row.k = std::stoul(fields[3], &used);
            for (std::size_t c = 0; c < kNumFeatures; ++c) {
                row.features[c] = std::stod(fields[5 + c], &used);
                if (used != fields[5 + c].size()) throw std::invalid_argument(fields[5 + c]);
            }
        } catch (const std::exception&) {
            throw Error(ErrorKind::InputFormat, where + "malformed number");
        }
        try {
            row.label = parse_label(fields[4]);
        } catch (const Error& e) {
            throw Error(ErrorKind::InputFormat, where + e.what());
        }
        bool finite = true;
        for (double v : row.features) finite = finite && std::isfinite(v);
        if (!finite) {
            ++table.dropped;
            continue;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace msmap
