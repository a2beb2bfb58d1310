#include "stes/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "stes/errors.hpp"

namespace stes {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& file, size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) {
        throw DataError(file + ":" + std::to_string(lineno) + ": unterminated quote");
    }
    out.push_back(std::move(field));
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<int> CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

int CsvTable::require_column(const std::string& name, const std::string& context) const {
    if (auto idx = column(name)) return *idx;
    throw DataError(context + ": missing required column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open '" + file.string() + "'");
    }
    CsvTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line, file.string(), lineno);
        for (auto& f : fields) f = trim(f);
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size()) {
                throw DataError(file.string() + ":" + std::to_string(lineno) +
                                ": expected " + std::to_string(table.header.size()) +
                                " fields, got " + std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) {
        throw DataError(file.string() + ": empty file (header row required)");
    }
    return table;
}

double parse_value(const std::string& field, const std::string& context) {
    if (field.empty() || field == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0' || errno == ERANGE) {
        throw DataError(context + ": cannot parse value '" + field + "'");
    }
    return v;
}

void write_file_atomic(const std::filesystem::path& file, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
    std::error_code ec;
    fs::create_directories(dir, ec);

    std::random_device rd;
    const fs::path tmp = dir / (file.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot create '" + tmp.string() + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw IoError("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, file, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename temp file onto '" + file.string() + "'");
    }
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::ostringstream out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << "\"\"";
                else out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
    return out.str();
}

}  // namespace stes
