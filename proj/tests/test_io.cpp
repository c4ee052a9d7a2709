#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfspde/io.hpp"

using namespace mfspde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sha256 test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("doubles print with 17 significant digits") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(1.0) == "1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("csv layout") {
    CHECK(to_csv({"t", "x", "v"}, {{0.0, 0.5, -2.0}}) == "t,x,v\n0,0.5,-2\n");
    CHECK_THROWS(to_csv({"t", "x"}, {{1.0}}));
}

TEST_CASE("bundle hash covers content but not the timestamp") {
    ResultBundle b;
    b.add_csv("a.csv", {"t", "x"}, {{0.0, 1.0}});
    b.add_json("b.json", {{"k", 1}});
    const auto dir1 = fs::temp_directory_path() / "mfspde_io_1";
    const auto dir2 = fs::temp_directory_path() / "mfspde_io_2";
    const auto m1 = b.write(dir1.string(), "simulate", "echo", "cfg");
    const auto m2 = b.write(dir2.string(), "simulate", "echo", "cfg");
    CHECK(m1["bundle_hash"] == m2["bundle_hash"]);
    CHECK(m1["files"]["a.csv"] == sha256_hex(slurp(dir1 / "a.csv")));
    CHECK(fs::exists(dir1 / "manifest.json"));
    CHECK(b.bundle_hash("cfg") != b.bundle_hash("other"));

    ResultBundle c = b;
    c.add_text("a.csv", "t,x\n0,2\n");
    CHECK(c.bundle_hash("cfg") != b.bundle_hash("cfg"));
    CHECK_THROWS(c.add_text("manifest.json", "{}"));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}
