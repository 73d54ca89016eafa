#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfder/cli.hpp"
#include "cfder/text.hpp"

using namespace cfder;
using B = BoolSemiring;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string corpus(const std::string& name) {
    return std::string(CFDER_CORPUS_DIR) + "/" + name;
}

std::string write_temp(const std::string& name, const std::string& text) {
    std::string path = std::string("cli_test_") + name;
    std::ofstream f(path, std::ios::binary);
    f << text;
    return path;
}

}  // namespace

TEST_CASE("catalan demo prints the first coefficients") {
    RunResult r = run({"demo", "catalan", "--n", "9"});
    CHECK(r.code == 0);
    CHECK(r.out == "1 1 2 5 14 42 132 429 1430\n");
}

TEST_CASE("language demos enumerate accepted words") {
    RunResult r = run({"demo", "anbn", "--maxlen", "4"});
    CHECK(r.code == 0);
    CHECK(r.out == "_ 1\nab 1\naabb 1\n");
    RunResult rr = run({"demo", "anbmam+n", "--maxlen", "2"});
    CHECK(rr.code == 0);
    CHECK(rr.out == "_ 1\naa 1\nba 1\n");
}

TEST_CASE("membership") {
    RunResult yes = run({"member", "--input", corpus("anbn.grammar"), "--word", "aabb"});
    CHECK(yes.code == 0);
    CHECK(yes.out == "1\n");
    RunResult no = run({"member", "--input", corpus("anbn.grammar"), "--word", "aab"});
    CHECK(no.code == 1);
    CHECK(no.out == "0\n");
    RunResult eps = run({"member", "--input", corpus("anbn.grammar"), "--word", "_"});
    CHECK(eps.code == 0);
    CHECK(eps.out == "1\n");
    RunResult weighted = run({"member", "--input", corpus("catalan.grammar"), "--word", "aaa",
                              "--semiring", "nat"});
    CHECK(weighted.code == 0);
    CHECK(weighted.out == "5\n");
}

TEST_CASE("derivatives print the reached state") {
    RunResult r = run({"derive", "--input", corpus("anbn.grammar"), "--word", "a"});
    CHECK(r.code == 0);
    CHECK(r.out == "x y\n");
    RunResult mu = run({"derive", "--input", corpus("anbn.mu"), "--word", "a"});
    CHECK(mu.code == 0);
    // derivative of the binder unfolds once
    CHECK(mu.out.find("mu x . (1 + (a * (x * b)))") != std::string::npos);
}

TEST_CASE("series lists nonzero coefficients in order") {
    RunResult r = run({"series", "--input", corpus("running.grammar"), "--maxlen", "3"});
    CHECK(r.code == 0);
    CHECK(r.out == "_ 1\naa 1\nba 1\n");
    RunResult y = run({"series", "--input", corpus("running.grammar"), "--maxlen", "3",
                       "--start", "y"});
    CHECK(y.code == 0);
    CHECK(y.out == "_ 1\nba 1\n");
}

TEST_CASE("translate to the worked fixed-point expression") {
    RunResult r = run({"translate", "--input", corpus("running.terms"), "--from", "terms",
                       "--to", "mu", "--start", "x"});
    CHECK(r.code == 0);
    std::string expected =
        "#mu\nalphabet: a b\n"
        "mu x . (1 + ((a * (x * a)) + (b * ((mu y . (1 + ((a * 0) + (b * (y * a))))) * a))))\n";
    CHECK(r.out == expected);
}

TEST_CASE("translate between all representations stays equivalent") {
    const char* inputs[] = {"running.grammar", "running.terms", "running.mu"};
    const char* targets[] = {"grammar", "terms", "mu"};
    for (const char* input : inputs) {
        for (const char* to : targets) {
            CAPTURE(input);
            CAPTURE(to);
            RunResult r = run({"translate", "--input", corpus(input), "--to", to});
            REQUIRE(r.code == 0);
            std::string path = write_temp(std::string("xlat_") + input + "_" + to, r.out);

            // the translated file parses and agrees with its source
            LoadedInput<B> a = parse_input<B>(r.out);
            std::ifstream src(corpus(input), std::ios::binary);
            std::ostringstream ss;
            ss << src.rdbuf();
            LoadedInput<B> b = parse_input<B>(ss.str());
            EquivResult<B> eq = word_equiv(a.start_state(), b.start_state(), 8);
            CHECK(eq.equivalent());
            std::remove(path.c_str());
        }
    }
}

TEST_CASE("equivalence commands") {
    SUBCASE("grammar vs its fixed-point expression") {
        RunResult r = run({"equiv", corpus("running.grammar"), corpus("running.mu"),
                           "--mode", "word", "--bound", "9"});
        CHECK(r.code == 0);
        CHECK(r.out == "equivalent up to length 9\n");
    }
    SUBCASE("different languages separate with a witness") {
        RunResult r = run({"equiv", corpus("anbn.mu"), corpus("running.grammar")});
        CHECK(r.code == 1);
        CHECK(r.out.find("inequivalent, witness:") != std::string::npos);
    }
    SUBCASE("bisimulation mode proves a rewrite") {
        std::string t1 = write_temp("sum0.mu",
                                    "#mu\nalphabet: a b\n(mu x . (1 + (a * (x * b)))) + 0\n");
        std::string t2 = write_temp("plain.mu", "#mu\nalphabet: a b\nmu x . (1 + (a * (x * b)))\n");
        RunResult r = run({"equiv", t1, t2, "--mode", "bisim"});
        CHECK(r.code == 0);
        CHECK(r.out.find("equivalent (bisimulation") != std::string::npos);
        std::remove(t1.c_str());
        std::remove(t2.c_str());
    }
    SUBCASE("tiny budgets give up") {
        RunResult r = run({"equiv", corpus("anbn.mu"), corpus("running.grammar"),
                           "--mode", "bisim", "--bound", "2"});
        CHECK(r.code == 2);
        CHECK(r.out.find("unknown:") != std::string::npos);
    }
}

TEST_CASE("semiring check command") {
    RunResult r = run({"check-semiring", "--seed", "7", "--samples", "50"});
    CHECK(r.code == 0);
    CHECK(r.out.find("semiring law checks: 600\n") != std::string::npos);
    CHECK(r.out.find("morphism agreement checks: 50\n") != std::string::npos);
    CHECK(r.out.find("OK\n") != std::string::npos);

    RunResult file = run({"check-semiring", "--input", corpus("running.grammar"),
                          "--seed", "3", "--samples", "20"});
    CHECK(file.code == 0);
}

TEST_CASE("errors are reported with positions and a distinct exit code") {
    SUBCASE("missing file") {
        RunResult r = run({"member", "--input", "no_such_file.grammar", "--word", "a"});
        CHECK(r.code == 3);
        CHECK(r.err.find("cannot open") != std::string::npos);
    }
    SUBCASE("parse error carries file, line and column") {
        std::string path = write_temp("bad.grammar", "#grammar\nalphabet: a\nx -> a q\n");
        RunResult r = run({"member", "--input", path, "--word", "a"});
        CHECK(r.code == 3);
        CHECK(r.err.find(path + ":3:8:") != std::string::npos);
        std::remove(path.c_str());
    }
    SUBCASE("unknown flags") {
        RunResult r = run({"member", "--nope"});
        CHECK(r.code == 3);
    }
    SUBCASE("domain errors surface verbatim") {
        std::string path = write_temp("weak.grammar",
                                      "#grammar\nalphabet: a b\nx -> a x b\n");
        RunResult r = run({"member", "--input", path, "--word", "ab"});
        CHECK(r.code == 3);
        CHECK(r.err.find("Greibach") != std::string::npos);
        // the same file is fine for the powerset checks
        RunResult ok = run({"check-semiring", "--input", path, "--samples", "10"});
        CHECK(ok.code == 0);
        std::remove(path.c_str());
    }
}

TEST_CASE("help exits cleanly") {
    RunResult r = run({"--help"});
    CHECK(r.code == 0);
}
