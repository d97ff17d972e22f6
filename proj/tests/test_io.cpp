#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>

#include "f3m/dataset_io.hpp"
#include "f3m/error.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace f3m;
using testing::slurp;
using testing::spit;

TEST_CASE("F3M1 header layout") {
    testing::TempDir dir;
    const Points p(2, 3, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    write_f3m(dir.file("a.f3m"), p);
    const std::string bytes = slurp(dir.file("a.f3m"));
    REQUIRE(bytes.size() == 20 + 6 * 8);
    CHECK(bytes.substr(0, 4) == "F3M1");
    std::uint64_t n = 0;
    std::uint32_t d = 0;
    std::memcpy(&n, bytes.data() + 4, 8);
    std::memcpy(&d, bytes.data() + 12, 4);
    CHECK(n == 2);
    CHECK(d == 3);
    CHECK(bytes[16] == 0);
    CHECK(bytes[17] == 0);
    CHECK(bytes[18] == 0);
    CHECK(bytes[19] == 0);
    double first = 0.0;
    std::memcpy(&first, bytes.data() + 20, 8);
    CHECK(first == 1.0);
}

TEST_CASE("F3M1 round trips") {
    testing::TempDir dir;
    const Points p = testing::random_points(500, 4, 1);
    write_f3m(dir.file("d.f3m"), p);
    CHECK(read_f3m(dir.file("d.f3m")) == p);

    write_f3m(dir.file("s.f3m"), p, Precision::F32);
    CHECK(slurp(dir.file("s.f3m")).size() == 20 + 500 * 4 * 4);
    CHECK(slurp(dir.file("s.f3m"))[16] == 1);
    const Points narrow = read_f3m(dir.file("s.f3m"));
    for (std::size_t k = 0; k < p.data().size(); ++k) {
        CHECK(narrow.data()[k] == static_cast<double>(static_cast<float>(p.data()[k])));
    }

    const auto v = testing::random_vector(77, 2);
    write_vector(dir.file("v.f3m"), v);
    CHECK(read_vector(dir.file("v.f3m")) == v);
    CHECK_THROWS_AS((void)read_vector(dir.file("d.f3m")), Error);
}

TEST_CASE("F3M1 rejects damaged files") {
    testing::TempDir dir;
    write_f3m(dir.file("ok.f3m"), testing::random_points(10, 2, 3));
    const std::string good = slurp(dir.file("ok.f3m"));

    auto expect_error = [&](std::string bytes) {
        spit(dir.file("bad.f3m"), bytes);
        CHECK_THROWS_AS((void)read_f3m(dir.file("bad.f3m")), Error);
    };
    std::string magic = good;
    magic[3] = '2';
    expect_error(magic);
    expect_error(good.substr(0, good.size() - 1));
    expect_error(good.substr(0, 12));
    std::string reserved = good;
    reserved[18] = 1;
    expect_error(reserved);
    std::string tag = good;
    tag[16] = 7;
    expect_error(tag);
    std::string zero_dim = good;
    std::memset(zero_dim.data() + 12, 0, 4);
    expect_error(zero_dim);
    CHECK_THROWS_AS((void)read_f3m(dir.file("missing.f3m")), Error);
}

TEST_CASE("CSV ingest") {
    testing::TempDir dir;
    std::ostringstream csv;
    csv << "x,y,z\n";
    const Points p = testing::random_points(1000, 3, 4);
    for (std::size_t i = 0; i < p.size(); ++i) csv << p(i, 0) << ',' << p(i, 1) << ',' << p(i, 2) << '\n';
    spit(dir.file("in.csv"), csv.str());
    CsvReport report;
    const Points got = ingest_csv(dir.file("in.csv"), {}, &report);
    CHECK(got.size() == 1000);
    CHECK(got.dim() == 3);
    CHECK(report.header_skipped);
    CHECK(report.malformed_lines.empty());

    spit(dir.file("cols.csv"), "1,2,3\n4,5,6\n");
    CsvOptions cols;
    cols.columns = {2, 0};
    const Points picked = ingest_csv(dir.file("cols.csv"), cols);
    CHECK(picked == Points(2, 2, {3.0, 1.0, 6.0, 4.0}));

    spit(dir.file("semi.csv"), "1;2\n3;4\n");
    CsvOptions semi;
    semi.delimiter = ';';
    CHECK(ingest_csv(dir.file("semi.csv"), semi) == Points(2, 2, {1.0, 2.0, 3.0, 4.0}));
}

TEST_CASE("CSV non-finite and malformed rows") {
    testing::TempDir dir;
    spit(dir.file("nf.csv"), "1,2\nnan,3\n4,inf\n5,6\n");
    CsvReport report;
    const Points p = ingest_csv(dir.file("nf.csv"), {}, &report);
    CHECK(p == Points(2, 2, {1.0, 2.0, 5.0, 6.0}));
    CHECK(report.rejected_nonfinite == 2);

    std::string body = "1,2\n";
    for (int i = 0; i < 3; ++i) body += "oops,1\n";
    body += "7,8\n";
    spit(dir.file("few.csv"), body);
    const Points tolerated = ingest_csv(dir.file("few.csv"), {}, &report);
    CHECK(tolerated.size() == 2);
    CHECK(report.malformed_lines == std::vector<std::size_t>{2, 3, 4});

    body = "1,2\n";
    for (int i = 0; i < 11; ++i) body += "1,2,3\n";
    spit(dir.file("many.csv"), body);
    try {
        (void)ingest_csv(dir.file("many.csv"), {});
        FAIL("expected abort");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
        CHECK(std::string(e.what()).find("lines 2 3 4") != std::string::npos);
    }
}

TEST_CASE("ingest, export and ingest again is idempotent") {
    testing::TempDir dir;
    std::ostringstream csv;
    const Points p = testing::random_points(200, 2, 5, -3.0, 3.0);
    csv.precision(6);
    csv << "a,b\n";
    for (std::size_t i = 0; i < p.size(); ++i) csv << p(i, 0) << ',' << p(i, 1) << '\n';
    spit(dir.file("src.csv"), csv.str());
    write_f3m(dir.file("one.f3m"), ingest_csv(dir.file("src.csv"), {}));
    export_csv(dir.file("out.csv"), read_f3m(dir.file("one.f3m")));
    write_f3m(dir.file("two.f3m"), ingest_csv(dir.file("out.csv"), {}));
    CHECK(slurp(dir.file("one.f3m")) == slurp(dir.file("two.f3m")));
}
