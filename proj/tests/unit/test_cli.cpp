#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../tools/commands.hpp"
#include "support/corpus.hpp"

namespace fs = std::filesystem;
using namespace clipagent;
using clipagent::cli::run;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("clipagent_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "clipagent");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string corpus_file(const TempDir& dir, std::size_t n) {
    std::ostringstream os;
    write_dataset(os, testsupport::make_corpus(n, 3));
    const auto p = dir.file("samples.jsonl");
    spit(p, os.str());
    return p;
}

}  // namespace

TEST_CASE("version and schema") {
    auto r = invoke({"--version"});
    CHECK(r.code == 0);
    const Json v = Json::parse(r.out);
    CHECK(v["name"] == "clipagent");
    CHECK(v.contains("iou_kernel"));
    r = invoke({"--schema"});
    CHECK(r.code == 0);
    CHECK(Json::parse(r.out).is_object());
    CHECK(invoke({}).code == 1);
    CHECK(invoke({"bogus"}).code == 1);
}

TEST_CASE("rollout, reward, dgrpo and eval chain") {
    TempDir dir;
    const auto samples = corpus_file(dir, 2);
    auto r = invoke({"rollout", "--samples", samples, "--group-size", "2", "--seed", "4", "--out",
                     dir.file("traj.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(lines(slurp(dir.file("traj.jsonl"))) == 4);

    r = invoke({"reward", "--trajectories", dir.file("traj.jsonl"), "--samples", samples, "--out",
                dir.file("rew.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(lines(slurp(dir.file("rew.jsonl"))) == 4);

    r = invoke({"dgrpo", "--rewards", dir.file("rew.jsonl"), "--group-size", "2"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 2);
    const Json g = Json::parse(r.out.substr(0, r.out.find('\n')));
    CHECK(g["group_size"] == 2);

    r = invoke({"eval", "--trajectories", dir.file("traj.jsonl"), "--samples", samples, "--csv",
                dir.file("eval.csv")});
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out)["overall"]["n"] == 4);
    CHECK(slurp(dir.file("eval.csv")).rfind("name,R@0.3,R@0.5,R@0.7,mIoU\n", 0) == 0);
}

TEST_CASE("dgrpo rejects ragged and scattered groups") {
    TempDir dir;
    auto rec = [](const std::string& id, int k) {
        RewardRecord r{id, k, TaskKind::vqa_mcq, "Video-R1", {1.0, 0.5, 0.0, std::nullopt, std::nullopt}};
        return to_json(r).dump() + "\n";
    };
    spit(dir.file("ragged.jsonl"), rec("a", 0) + rec("a", 1) + rec("b", 0));
    auto r = invoke({"dgrpo", "--rewards", dir.file("ragged.jsonl"), "--group-size", "2"});
    CHECK(r.code == 1);
    CHECK(r.err.find("b") != std::string::npos);

    spit(dir.file("scattered.jsonl"), rec("a", 0) + rec("b", 0) + rec("a", 1) + rec("b", 1));
    CHECK(invoke({"dgrpo", "--rewards", dir.file("scattered.jsonl"), "--group-size", "2"}).code == 1);

    spit(dir.file("ok.jsonl"), rec("a", 0) + rec("a", 1));
    CHECK(invoke({"dgrpo", "--rewards", dir.file("ok.jsonl"), "--group-size", "2"}).code == 0);
    CHECK(invoke({"dgrpo", "--rewards", dir.file("ok.jsonl"), "--weight-fn", "omega7"}).code == 1);
}

TEST_CASE("exit codes") {
    TempDir dir;
    spit(dir.file("bad.jsonl"), "{\"sample_id\":\"a\"}\n");
    CHECK(invoke({"rollout", "--samples", dir.file("bad.jsonl")}).code == 1);
    CHECK(invoke({"rollout", "--samples", dir.file("missing.jsonl")}).code == 2);

    const auto samples = corpus_file(dir, 1);
    const auto r = invoke({"rollout", "--samples", samples, "--policy", "endpoint:127.0.0.1:1"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK(invoke({"rollout", "--samples", samples, "--group-size", "1"}).code == 1);
}

TEST_CASE("environment overrides") {
    TempDir dir;
    const auto samples = corpus_file(dir, 2);
    ::setenv("CLIPAGENT_GROUP_SIZE", "3", 1);
    auto r = invoke({"rollout", "--samples", samples});
    ::unsetenv("CLIPAGENT_GROUP_SIZE");
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 6);

    ::setenv("CLIPAGENT_GROUP_SIZE", "3", 1);
    r = invoke({"rollout", "--samples", samples, "--group-size", "2"});
    ::unsetenv("CLIPAGENT_GROUP_SIZE");
    CHECK(lines(r.out) == 4);
}

TEST_CASE("filter writes split, candidates and report") {
    TempDir dir;
    const auto samples = corpus_file(dir, 12);
    const auto r = invoke({"filter", "--samples", samples, "--policy", "mock:accuracy=0.5,sigma=0.1", "--out",
                           dir.file("rl.jsonl"), "--cot-out", dir.file("cot.jsonl"), "--report",
                           dir.file("report.json")});
    REQUIRE(r.code == 0);
    const Json rep = Json::parse(slurp(dir.file("report.json")));
    CHECK(rep["overall"]["total"] == 12);
    CHECK(lines(slurp(dir.file("rl.jsonl"))) == rep["overall"]["kept"].get<std::size_t>());
    CHECK(lines(slurp(dir.file("cot.jsonl"))) == rep["overall"]["kept"].get<std::size_t>());
}

TEST_CASE("same seed, same bytes") {
    TempDir dir;
    const auto samples = corpus_file(dir, 5);
    const auto a = invoke({"rollout", "--samples", samples, "--seed", "9", "--jobs", "3"});
    const auto b = invoke({"rollout", "--samples", samples, "--seed", "9"});
    const auto c = invoke({"rollout", "--samples", samples, "--seed", "10"});
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
}
