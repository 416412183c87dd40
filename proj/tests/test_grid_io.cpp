#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "varcert/grid.hpp"
#include "varcert/gridfunction_io.hpp"
#include "varcert/rng.hpp"

using namespace varcert;

TEST_CASE("grid basics and quadrature") {
    Grid g(1, 10);
    REQUIRE(g.h() == Catch::Approx(0.1));
    REQUIRE(g.node_count() == 10);
    REQUIRE(g.node(0).x == Catch::Approx(0.05));
    REQUIRE(g.node(9).x == Catch::Approx(0.95));

    Grid g2(2, 4);
    REQUIRE(g2.node_count() == 16);
    REQUIRE(g2.node(5).x == Catch::Approx(0.375)); // ix=1, iy=1
    REQUIRE(g2.node(5).y == Catch::Approx(0.375));

    CHECK_THROWS_AS(Grid(3, 4), config_error);
    CHECK_THROWS_AS(Grid(1, 1), config_error);
}

TEST_CASE("inner product: constants and indicator") {
    Grid g(1, 10);
    GridFunction one(g, 1.0);
    // Constant 1 pairs with itself to exactly the domain volume.
    REQUIRE(inner(one, one) == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(norm(one) == Catch::Approx(1.0).margin(1e-14));

    // Indicator of the left half of the interval.
    GridFunction half(g);
    for (std::size_t i = 0; i < g.node_count(); ++i)
        half[i] = g.node(i).x < 0.5 ? 1.0 : 0.0;
    REQUIRE(inner(one, half) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("inner product invariants on random functions") {
    Grid g(1, 37);
    Rng rng(99);
    for (int rep = 0; rep < 200; ++rep) {
        GridFunction a(g), b(g);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        // Cauchy-Schwarz with relative slack.
        const double lhs = std::abs(inner(a, b));
        const double rhs = norm(a) * norm(b);
        REQUIRE(lhs <= rhs * (1.0 + 1e-12));
        // Bilinearity spot check.
        GridFunction c = lincomb(2.0, a, -3.0, b);
        REQUIRE(inner(c, b) ==
                Catch::Approx(2.0 * inner(a, b) - 3.0 * inner(b, b)).margin(1e-12));
    }
    // Constant-norm exactness across sizes.
    for (int n : {2, 16, 33, 128}) {
        Grid gn(1, n);
        GridFunction cn(gn, -2.5);
        REQUIRE(std::abs(norm(cn) - 2.5) <= 1e-14 * 2.5);
    }
}

TEST_CASE("GF01 round trip is bit-exact") {
    Rng rng(7);
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_index(30));
        const int dim = rep % 4 == 0 ? 2 : 1;
        Grid g(dim, n);
        GridFunction f(g);
        for (std::size_t i = 0; i < g.node_count(); ++i) f[i] = rng.normal() * 1e3;
        std::stringstream buf;
        write_gf01(buf, f);
        GridFunction back = read_gf01(buf);
        REQUIRE(back.grid() == f.grid());
        for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(back[i] == f[i]);
    }
}

TEST_CASE("GF01 malformed inputs are rejected") {
    Grid g(1, 4);
    GridFunction f(g, 1.5);
    std::stringstream ok;
    write_gf01(ok, f);
    const std::string bytes = ok.str();

    SECTION("bad magic") {
        std::string b = bytes;
        b[0] = 'X';
        std::stringstream s(b);
        CHECK_THROWS_AS(read_gf01(s), io_error);
    }
    SECTION("truncated payload") {
        std::stringstream s(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(read_gf01(s), io_error);
    }
    SECTION("trailing bytes") {
        std::stringstream s(bytes + "zz");
        CHECK_THROWS_AS(read_gf01(s), io_error);
    }
    SECTION("bad dim") {
        std::string b = bytes;
        b[4] = 7;
        std::stringstream s(b);
        CHECK_THROWS_AS(read_gf01(s), io_error);
    }
    SECTION("non-finite entry") {
        GridFunction bad(g, 0.0);
        bad[2] = std::numeric_limits<double>::quiet_NaN();
        std::stringstream s;
        write_gf01(s, bad);
        CHECK_THROWS_AS(read_gf01(s), io_error);
    }
}

TEST_CASE("csv grid function read") {
    Grid g(1, 4);
    SECTION("happy path with comments and header") {
        std::stringstream s("# produced for a test\nindex,value\n2,3.5\n0,1.0\n1,-2e-1\n3,0\n");
        GridFunction f = read_csv_gridfunction(s, g);
        REQUIRE(f[0] == 1.0);
        REQUIRE(f[1] == -0.2);
        REQUIRE(f[2] == 3.5);
        REQUIRE(f[3] == 0.0);
    }
    SECTION("missing index") {
        std::stringstream s("0,1\n1,1\n2,1\n");
        CHECK_THROWS_AS(read_csv_gridfunction(s, g), io_error);
    }
    SECTION("duplicate index") {
        std::stringstream s("0,1\n0,2\n1,1\n2,1\n3,1\n");
        CHECK_THROWS_AS(read_csv_gridfunction(s, g), io_error);
    }
    SECTION("out of range index") {
        std::stringstream s("0,1\n1,1\n2,1\n9,1\n");
        CHECK_THROWS_AS(read_csv_gridfunction(s, g), io_error);
    }
    SECTION("garbage row") {
        std::stringstream s("0,1\n1,one point five\n2,1\n3,1\n");
        CHECK_THROWS_AS(read_csv_gridfunction(s, g), io_error);
    }
    SECTION("non-finite value") {
        std::stringstream s("0,1\n1,nan\n2,1\n3,1\n");
        CHECK_THROWS_AS(read_csv_gridfunction(s, g), io_error);
    }
}

TEST_CASE("csv writer uses fixed format") {
    Grid g(1, 2);
    GridFunction f(g);
    f[0] = 1.0 / 3.0;
    f[1] = -12345.678;
    std::stringstream s;
    write_csv_gridfunction(s, f);
    REQUIRE(s.str() == "index,value\n0,3.333333333333e-01\n1,-1.234567800000e+04\n");
}

TEST_CASE("rng determinism") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        REQUIRE(x == b.uniform());
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
    // Different seed, different stream (overwhelmingly).
    int same = 0;
    for (int i = 0; i < 100; ++i)
        if (a.next_u64() == c.next_u64()) ++same;
    REQUIRE(same == 0);
    // Normal moments sanity.
    Rng r(5);
    double m = 0, s2 = 0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        const double x = r.normal();
        m += x;
        s2 += x * x;
    }
    m /= N;
    s2 = s2 / N - m * m;
    REQUIRE(std::abs(m) < 0.03);
    REQUIRE(std::abs(s2 - 1.0) < 0.05);
}
