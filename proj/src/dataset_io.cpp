#include "f3m/dataset_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "f3m/error.hpp"

namespace f3m {

namespace {

static_assert(std::endian::native == std::endian::little, "F3M1 I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'F', '3', 'M', '1'};

template <typename T>
void put(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorKind::Io, path + ": truncated header");
    return value;
}

bool parse_field(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

void write_f3m(const std::string& path, const Points& points, Precision precision) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    os.write(kMagic.data(), kMagic.size());
    put<std::uint64_t>(os, points.size());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(points.dim()));
    put<std::uint8_t>(os, precision == Precision::F32 ? 1 : 0);
    const std::array<char, 3> reserved{};
    os.write(reserved.data(), reserved.size());
    const auto data = points.data();
    if (precision == Precision::F32) {
        std::vector<float> narrow(data.begin(), data.end());
        os.write(reinterpret_cast<const char*>(narrow.data()),
                 static_cast<std::streamsize>(narrow.size() * sizeof(float)));
    } else {
        os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!os) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

Points read_f3m(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        fail(ErrorKind::InvalidInput, path + ": not an F3M1 file");
    }
    const auto n = get<std::uint64_t>(is, path);
    const auto dim = get<std::uint32_t>(is, path);
    const auto tag = get<std::uint8_t>(is, path);
    std::array<char, 3> reserved{};
    if (!is.read(reserved.data(), reserved.size())) fail(ErrorKind::Io, path + ": truncated header");
    if (reserved != std::array<char, 3>{}) fail(ErrorKind::InvalidInput, path + ": reserved header bytes are not zero");
    if (tag > 1) fail(ErrorKind::InvalidInput, path + ": unknown precision tag " + std::to_string(tag));
    if (dim < 1 || dim > kMaxDim) fail(ErrorKind::InvalidInput, path + ": dimension out of range");

    const std::size_t width = tag == 1 ? sizeof(float) : sizeof(double);
    is.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(is.tellg());
    if (n > (file_size - kF3m1HeaderBytes) / width / dim ||
        file_size != kF3m1HeaderBytes + n * dim * width) {
        fail(ErrorKind::InvalidInput, path + ": payload size does not match the header");
    }
    is.seekg(static_cast<std::streamoff>(kF3m1HeaderBytes));
    std::vector<double> data(n * dim);
    if (tag == 1) {
        std::vector<float> narrow(data.size());
        is.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(narrow.size() * sizeof(float)));
        std::copy(narrow.begin(), narrow.end(), data.begin());
    } else {
        is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!is) fail(ErrorKind::Io, path + ": truncated payload");
    return Points(n, dim, std::move(data));
}

void write_vector(const std::string& path, std::span<const double> values, Precision precision) {
    write_f3m(path, Points(values.size(), 1, std::vector<double>(values.begin(), values.end())), precision);
}

std::vector<double> read_vector(const std::string& path) {
    Points pts = read_f3m(path);
    if (pts.dim() != 1) fail(ErrorKind::InvalidInput, path + ": expected a vector file (D = 1)");
    return {pts.data().begin(), pts.data().end()};
}

Points ingest_csv(const std::string& path, const CsvOptions& options, CsvReport* report) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::Io, "cannot open '" + path + "'");
    CsvReport local;
    std::vector<double> data;
    std::size_t dim = options.columns.size();
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> row;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_line(line, options.delimiter);
        row.clear();
        bool ok = true;
        if (options.columns.empty()) {
            for (const auto field : fields) {
                double value = 0.0;
                ok = ok && parse_field(field, value);
                row.push_back(value);
            }
        } else {
            for (std::size_t col : options.columns) {
                double value = 0.0;
                ok = ok && col < fields.size() && parse_field(fields[col], value);
                row.push_back(value);
            }
        }
        if (dim == 0 && ok) dim = row.size();
        if (ok && row.size() != dim) ok = false;
        if (!ok) {
            if (local.rows == 0 && !local.header_skipped && local.malformed_lines.empty()) {
                local.header_skipped = true;
                continue;
            }
            local.malformed_lines.push_back(line_no);
            continue;
        }
        bool finite = true;
        for (double v : row) finite = finite && std::isfinite(v);
        if (!finite) {
            ++local.rejected_nonfinite;
            continue;
        }
        data.insert(data.end(), row.begin(), row.end());
        ++local.rows;
    }
    if (local.malformed_lines.size() > options.max_malformed) {
        std::ostringstream msg;
        msg << path << ": " << local.malformed_lines.size() << " malformed rows (limit " << options.max_malformed
            << "), first at lines";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, local.malformed_lines.size()); ++i) {
            msg << ' ' << local.malformed_lines[i];
        }
        fail(ErrorKind::InvalidInput, msg.str());
    }
    if (local.rows == 0) fail(ErrorKind::InvalidInput, path + ": no numeric rows");
    if (dim > kMaxDim) fail(ErrorKind::InvalidInput, path + ": more than 7 columns selected");
    local.dim = dim;
    if (report != nullptr) *report = local;
    return Points(local.rows, dim, std::move(data));
}

void export_csv(const std::string& path, const Points& points, char delimiter) {
    std::FILE* file = std::fopen(path.c_str(), "w");
    if (file == nullptr) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t d = 0; d < points.dim(); ++d) {
            if (d > 0) std::fputc(delimiter, file);
            std::fprintf(file, "%.17g", points(i, d));
        }
        std::fputc('\n', file);
    }
    if (std::fclose(file) != 0) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace f3m
