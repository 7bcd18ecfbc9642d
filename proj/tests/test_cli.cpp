#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <drs/corpus.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "drs_cli_suite";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path out_path = work_dir() / "stdout.txt";
  const fs::path err_path = work_dir() / "stderr.txt";
  const std::string cmd = std::string(DRS_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

/// Shared tiny dataset: synthetic corpus plus an augmented pair set, built
/// once because several commands chain off these files.
struct Fixture {
  fs::path data = work_dir() / "data";
  fs::path train_tsv = data / "train.tsv";
  fs::path valid_tsv = data / "valid.tsv";
  fs::path test_tsv = data / "test.tsv";
  fs::path tap_tsv = data / "tap.tsv";
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture fx;
    RunResult synth = run_cli("synth --output-dir " + fx.data.string() +
                              " --dialogues 100 --turns-min 2 --turns-max 3"
                              " --vocab-size 20 --valid-groups 5 --test-groups 10"
                              " --group-size 10 --seed 4321");
    REQUIRE(synth.exit_code == 0);
    RunResult augment = run_cli("augment --input " + fx.train_tsv.string() +
                                " --output " + fx.tap_tsv.string() +
                                " --ratio 1 --seed 9");
    REQUIRE(augment.exit_code == 0);
    return fx;
  }();
  return f;
}

std::string pretrain_flags(const fs::path& ckpt_dir, int seed) {
  return "pretrain --train " + fixture().tap_tsv.string() + " --valid " +
         fixture().valid_tsv.string() + " --group-size 10 --checkpoint-dir " +
         ckpt_dir.string() +
         " --layers 1 --heads 2 --hidden 16 --ffn-multiplier 2"
         " --task-mix mlm+nsp --epochs 1 --batch-size 64 --warmup 1"
         " --lr 1e-3 --max-len 24 --seed " +
         std::to_string(seed);
}

}  // namespace

TEST_CASE("--version reports the toolkit version") {
  const RunResult r = run_cli("--version");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("a missing subcommand or required flag is a usage error") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("stats").exit_code == 1);
  CHECK(run_cli("no-such-command").exit_code == 1);
}

TEST_CASE("synth writes three corpora with provenance sidecars") {
  const Fixture& fx = fixture();
  for (const fs::path* p : {&fx.train_tsv, &fx.valid_tsv, &fx.test_tsv}) {
    CHECK(fs::exists(*p));
    CHECK(fs::exists(p->string() + ".meta.json"));
  }
  const drs::ParseResult train = drs::parse_tsv_file(fx.train_tsv.string(), true);
  CHECK(train.dialogues.size() == 200);  // one positive and one negative per dialogue

  const auto meta = json::parse(slurp(fx.train_tsv.string() + ".meta.json"));
  CHECK(meta.at("command").get<std::string>() == "synth");
  CHECK(meta.at("config").at("seed").get<std::string>() == "4321");
  CHECK(meta.at("config").at("dialogues").get<std::string>() == "100");
}

TEST_CASE("synth output is a pure function of its flags") {
  const fs::path again = work_dir() / "synth_again";
  const fs::path other = work_dir() / "synth_other";
  REQUIRE(run_cli("synth --output-dir " + again.string() +
                  " --dialogues 100 --turns-min 2 --turns-max 3 --vocab-size 20"
                  " --valid-groups 5 --test-groups 10 --group-size 10 --seed 4321")
              .exit_code == 0);
  REQUIRE(run_cli("synth --output-dir " + other.string() +
                  " --dialogues 100 --turns-min 2 --turns-max 3 --vocab-size 20"
                  " --valid-groups 5 --test-groups 10 --group-size 10 --seed 4322")
              .exit_code == 0);
  CHECK(slurp(again / "train.tsv") == slurp(fixture().train_tsv));
  CHECK(slurp(other / "train.tsv") != slurp(fixture().train_tsv));
}

TEST_CASE("stats reports counts and embeds its provenance") {
  const RunResult r = run_cli("stats --input " + fixture().train_tsv.string());
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("pair_count").get<int>() == 200);
  CHECK(j.at("positive_count").get<int>() == 100);
  CHECK(j.at("negative_count").get<int>() == 100);
  CHECK(j.at("skipped_lines").get<int>() == 0);
  CHECK(j.at("provenance").at("command").get<std::string>() == "stats");
}

TEST_CASE("strict parsing fails with exit code 2, lenient recovers") {
  const fs::path bad = work_dir() / "bad.tsv";
  spit(bad, "7\thi\tyo\n1\tok\tfine\ngarbage\n");

  const RunResult strict = run_cli("stats --input " + bad.string());
  CHECK(strict.exit_code == 2);
  CHECK(strict.err.find("error:") != std::string::npos);
  CHECK(strict.err.find("line 1") != std::string::npos);

  const RunResult lenient = run_cli("stats --input " + bad.string() + " --lenient");
  REQUIRE(lenient.exit_code == 0);
  const auto j = json::parse(lenient.out);
  CHECK(j.at("pair_count").get<int>() == 1);
  CHECK(j.at("skipped_lines").get<int>() == 2);
}

TEST_CASE("a missing input file is a data error") {
  CHECK(run_cli("stats --input /nonexistent/nowhere.tsv").exit_code == 2);
  CHECK(run_cli("augment --input /nonexistent/nowhere.tsv --output " +
                (work_dir() / "x.tsv").string())
            .exit_code == 2);
}

TEST_CASE("augment obeys the pair-count law and is seed-deterministic") {
  const fs::path corpus = work_dir() / "law.tsv";
  // Positive turn counts 2 + 3 + 1 = 6; the negative row adds no pairs.
  spit(corpus,
       "1\tu1\tu2\tresp a\n"
       "1\tu1\tu2\tu3\tresp b\n"
       "1\tu1\tresp c\n"
       "0\tu1\tresp d\n");

  const fs::path out1 = work_dir() / "law_r2_a.tsv";
  const fs::path out2 = work_dir() / "law_r2_b.tsv";
  const fs::path out3 = work_dir() / "law_r2_c.tsv";
  REQUIRE(run_cli("augment --input " + corpus.string() + " --output " +
                  out1.string() + " --ratio 2 --seed 77")
              .exit_code == 0);
  REQUIRE(run_cli("augment --input " + corpus.string() + " --output " +
                  out2.string() + " --ratio 2 --seed 77")
              .exit_code == 0);
  REQUIRE(run_cli("augment --input " + corpus.string() + " --output " +
                  out3.string() + " --ratio 2 --seed 78")
              .exit_code == 0);

  const drs::ParseResult rows = drs::parse_tsv_file(out1.string(), true);
  CHECK(rows.dialogues.size() == (1 + 2) * 6);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1) != slurp(out3));

  const auto meta = json::parse(slurp(out1.string() + ".meta.json"));
  CHECK(meta.at("command").get<std::string>() == "augment");
  CHECK(meta.at("config").at("ratio").get<std::string>() == "2");
}

TEST_CASE("pretrain trains, checkpoints, reports, and is reproducible") {
  const fs::path dir_a = work_dir() / "pre_a";
  const fs::path dir_b = work_dir() / "pre_b";
  const fs::path vocab_path = work_dir() / "vocab.txt";

  const RunResult a = run_cli(pretrain_flags(dir_a, 11) + " --save-vocab " +
                              vocab_path.string());
  REQUIRE(a.exit_code == 0);
  CHECK(fs::exists(dir_a / "epoch-1.ckpt"));
  CHECK(fs::exists(dir_a / "train_report.jsonl"));
  CHECK(fs::exists((dir_a / "train_report.jsonl").string() + ".meta.json"));
  CHECK(fs::exists(vocab_path));

  // Every epoch line carries validation R@1 because --valid was given.
  std::istringstream report(slurp(dir_a / "train_report.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(report, line)) {
    const auto j = json::parse(line);
    CHECK(j.contains("valid_r_at_1"));
    CHECK(j.at("steps").get<int>() > 0);
    ++lines;
  }
  CHECK(lines == 1);

  const RunResult b = run_cli(pretrain_flags(dir_b, 11));
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(dir_a / "epoch-1.ckpt") == slurp(dir_b / "epoch-1.ckpt"));

  const fs::path dir_c = work_dir() / "pre_c";
  REQUIRE(run_cli(pretrain_flags(dir_c, 12)).exit_code == 0);
  CHECK(slurp(dir_a / "epoch-1.ckpt") != slurp(dir_c / "epoch-1.ckpt"));
}

TEST_CASE("pretrain can continue from an existing checkpoint") {
  const fs::path base = work_dir() / "pre_a";  // built by the previous case
  REQUIRE(fs::exists(base / "epoch-1.ckpt"));
  const fs::path cont = work_dir() / "pre_continued";
  const RunResult r = run_cli(
      "pretrain --train " + fixture().tap_tsv.string() + " --init-checkpoint " +
      (base / "epoch-1.ckpt").string() + " --checkpoint-dir " + cont.string() +
      " --epochs 1 --batch-size 64 --warmup 1 --lr 1e-3 --max-len 24 --seed 11");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(cont / "epoch-1.ckpt"));
  // Continued training moved the weights.
  CHECK(slurp(cont / "epoch-1.ckpt") != slurp(base / "epoch-1.ckpt"));
}

TEST_CASE("evaluate ranks a checkpoint and dumps per-candidate scores") {
  const fs::path ckpt = work_dir() / "pre_a" / "epoch-1.ckpt";
  REQUIRE(fs::exists(ckpt));
  const fs::path metrics = work_dir() / "metrics.json";
  const fs::path scores = work_dir() / "scores.tsv";

  const std::string cmd = "evaluate --checkpoint " + ckpt.string() + " --test " +
                          fixture().test_tsv.string() + " --group-size 10 --output " +
                          metrics.string() + " --score-dump " + scores.string();
  REQUIRE(run_cli(cmd).exit_code == 0);

  const auto j = json::parse(slurp(metrics));
  CHECK(j.at("group_count").get<int>() == 10);
  CHECK(j.at("skipped_groups").get<int>() == 0);
  CHECK(j.at("r_at_1").get<double>() >= 0.0);
  CHECK(j.at("r_at_1").get<double>() <= 1.0);
  CHECK(j.at("map").get<double>() > 0.0);
  CHECK(j.at("provenance").at("command").get<std::string>() == "evaluate");

  // 10 groups x 10 candidates, one line each.
  std::istringstream dump(slurp(scores));
  std::string line;
  int rows = 0;
  while (std::getline(dump, line)) ++rows;
  CHECK(rows == 100);
  CHECK(fs::exists(scores.string() + ".meta.json"));

  // Identical invocations produce identical artifacts.
  const std::string first_metrics = slurp(metrics);
  const std::string first_scores = slurp(scores);
  REQUIRE(run_cli(cmd).exit_code == 0);
  CHECK(slurp(metrics) == first_metrics);
  CHECK(slurp(scores) == first_scores);
}

TEST_CASE("evaluate rejects groups whose contexts disagree") {
  const fs::path ckpt = work_dir() / "pre_a" / "epoch-1.ckpt";
  const fs::path broken = work_dir() / "broken_groups.tsv";
  std::string rows;
  for (int i = 0; i < 10; ++i) {
    rows += std::string("0\t") + (i == 4 ? "different f0 c0" : "f1 f2 c0") +
            "\te0 f1\n";
  }
  spit(broken, rows);
  const RunResult r = run_cli("evaluate --checkpoint " + ckpt.string() + " --test " +
                              broken.string() + " --group-size 10");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("block 0") != std::string::npos);
}

TEST_CASE("finetune produces a new checkpoint and honors the lr grid") {
  const fs::path base = work_dir() / "pre_a" / "epoch-1.ckpt";
  REQUIRE(fs::exists(base));
  const fs::path out = work_dir() / "finetuned.ckpt";
  const fs::path report = work_dir() / "ft_report.jsonl";

  const RunResult r = run_cli("finetune --checkpoint " + base.string() + " --train " +
                              fixture().train_tsv.string() + " --valid " +
                              fixture().valid_tsv.string() +
                              " --group-size 10 --output " + out.string() +
                              " --report " + report.string() +
                              " --epochs 1 --batch-size 64 --warmup 1 --lr 1e-3"
                              " --max-len 24 --seed 5");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out));
  CHECK(fs::exists(report));
  CHECK(slurp(out) != slurp(base));

  const fs::path grid_out = work_dir() / "grid.ckpt";
  const fs::path grid_report = work_dir() / "grid.json";
  const RunResult g = run_cli("finetune --checkpoint " + base.string() + " --train " +
                              fixture().train_tsv.string() + " --valid " +
                              fixture().valid_tsv.string() +
                              " --group-size 10 --output " + grid_out.string() +
                              " --lr-grid 1e-4,1e-3 --grid-report " +
                              grid_report.string() +
                              " --epochs 1 --batch-size 64 --warmup 1 --max-len 24"
                              " --seed 5");
  REQUIRE(g.exit_code == 0);
  const auto grid = json::parse(slurp(grid_report));
  CHECK(grid.at("entries").size() == 2);
  const double best = grid.at("best_lr").get<double>();
  CHECK((best == 1e-4 || best == 1e-3));

  // The grid needs validation groups to score against.
  const RunResult no_valid = run_cli(
      "finetune --checkpoint " + base.string() + " --train " +
      fixture().train_tsv.string() + " --output " + grid_out.string() +
      " --lr-grid 1e-4,1e-3 --epochs 1 --batch-size 64 --warmup 1 --max-len 24");
  CHECK(no_valid.exit_code == 1);
  CHECK(no_valid.err.find("error:") != std::string::npos);
}

TEST_CASE("finetune refuses an all-positive training file with exit code 3") {
  const fs::path base = work_dir() / "pre_a" / "epoch-1.ckpt";
  const fs::path all_pos = work_dir() / "all_pos.tsv";
  spit(all_pos, "1\tf1 c0\te0 f2\n1\tf2 c1\te1 f3\n");
  const RunResult r = run_cli("finetune --checkpoint " + base.string() + " --train " +
                              all_pos.string() + " --output " +
                              (work_dir() / "nope.ckpt").string() +
                              " --epochs 1 --batch-size 2 --warmup 0 --max-len 24");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("ngram prints the overlap report as JSON") {
  const fs::path train = work_dir() / "ngram_train.tsv";
  const fs::path test = work_dir() / "ngram_test.tsv";
  // Responses are too short to form 5-grams, so only the contexts count.
  spit(train, "1\ta b c d e f\tz1 z2\n");
  spit(test, "1\tb c d e f g\tz1 z2\n");

  const RunResult r = run_cli("ngram --train " + train.string() + " --test " +
                              test.string() + " --n 5");
  REQUIRE(r.exit_code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("n").get<int>() == 5);
  CHECK(j.at("train_distinct").get<int>() == 2);
  CHECK(j.at("test_distinct").get<int>() == 2);
  CHECK(j.at("shared").get<int>() == 1);
  CHECK(j.at("overlap_percent").get<double>() == 50.00);

  const RunResult hashed = run_cli("ngram --train " + train.string() + " --test " +
                                   test.string() + " --n 5 --mode hashed");
  REQUIRE(hashed.exit_code == 0);
  CHECK(json::parse(hashed.out).at("overlap_percent").get<double>() == 50.00);

  CHECK(run_cli("ngram --train " + train.string() + " --test " + test.string() +
                " --mode bogus")
            .exit_code == 1);
}

TEST_CASE("config files feed options but explicit flags win") {
  const fs::path train = work_dir() / "ngram_train.tsv";  // from the previous case
  const fs::path test = work_dir() / "ngram_test.tsv";
  const fs::path conf = work_dir() / "ngram.conf";
  spit(conf, "[ngram]\nn=2\n");

  const RunResult from_config = run_cli("ngram --train " + train.string() +
                                        " --test " + test.string() + " --config " +
                                        conf.string());
  REQUIRE(from_config.exit_code == 0);
  CHECK(json::parse(from_config.out).at("n").get<int>() == 2);

  const RunResult overridden = run_cli("ngram --train " + train.string() + " --test " +
                                       test.string() + " --config " + conf.string() +
                                       " --n 5");
  REQUIRE(overridden.exit_code == 0);
  CHECK(json::parse(overridden.out).at("n").get<int>() == 5);
}
