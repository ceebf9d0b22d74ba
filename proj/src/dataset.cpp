#include "cascadelab/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace cascadelab {

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw IoError("failed to format double");
    return std::string(buf, ptr);
}

static double parse_double(std::string_view token, const std::string& where) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError("bad numeric field '" + std::string(token) + "' at " + where);
    }
    return value;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const std::size_t dim = ds.feature_dim();
    for (std::size_t j = 0; j < dim; ++j) out << 'f' << j << ',';
    out << "label\n";
    for (const auto& ex : ds) {
        for (double v : ex.x) out << format_double(v) << ',';
        out << ex.y << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Dataset read_csv(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV: " + path.string());

    std::vector<LabeledExample> examples;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        LabeledExample ex;
        std::size_t start = 0;
        std::vector<std::string_view> fields;
        const std::string_view sv(line);
        while (true) {
            const std::size_t comma = sv.find(',', start);
            if (comma == std::string_view::npos) {
                fields.push_back(sv.substr(start));
                break;
            }
            fields.push_back(sv.substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() < 2) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
        }
        const std::string where = path.string() + ":" + std::to_string(lineno);
        for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
            ex.x.push_back(parse_double(fields[j], where));
        }
        ex.y = static_cast<int>(parse_double(fields.back(), where));
        examples.push_back(std::move(ex));
    }
    return Dataset(std::move(examples), num_classes);
}

}  // namespace cascadelab
