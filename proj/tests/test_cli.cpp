#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "liouvlab/io.hpp"

namespace fs = std::filesystem;
using liouvlab::io::read_text;
using liouvlab::io::write_text;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + LIOUVLAB_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = read_text(out);
  o.err = read_text(err);
  return o;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::current_path() / "cli-scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& text, const std::string& part) { return text.find(part) != std::string::npos; }

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST_CASE("invalid configs exit 2 with the offending line") {
  const auto dir = scratch("bad-config");
  write_text(dir / "d3.toml", "experiment = \"verify-liouville\"\n[model]\nd = 3\n");
  const auto o = cli("verify-liouville --config \"" + (dir / "d3.toml").string() + "\"", dir);
  CHECK(o.code == 2);
  CHECK(contains(o.err, "line 3"));
  CHECK(contains(o.err, "model.d"));

  write_text(dir / "unknown.toml", "[flow]\ndt = 0.01\nspeed = 2\n");
  const auto u = cli("sample --config \"" + (dir / "unknown.toml").string() + "\"", dir);
  CHECK(u.code == 2);
  CHECK(contains(u.err, "line 3"));

  write_text(dir / "other.toml", "\nexperiment = \"mollify\"\n");
  const auto m = cli("sample --config \"" + (dir / "other.toml").string() + "\"", dir);
  CHECK(m.code == 2);
  CHECK(contains(m.err, "line 2"));

  CHECK(cli("sample --set model.s=-1", dir).code == 2);
  CHECK(cli("sample --set nope", dir).code == 2);
  CHECK(cli("no-such-command", dir).code == 2);
}

TEST_CASE("numerical failures exit 3 and name the operation") {
  const auto dir = scratch("runtime");
  const auto o = cli("evolve --set model.d=2 --set 'model.kind=\"laplacian_mean_zero\"' --set 'measure.kind=\"enstrophy\"'"
                     " --set 'nonlinearity.kind=\"none\"' --set 'flow.kind=\"msqg\"' --set flow.dt=1.0 --out \"" +
                         (dir / "out").string() + "\"",
                     dir);
  CHECK(o.code == 3);
  CHECK(contains(o.err + o.out, "integrate_msqg"));
}

TEST_CASE("dump-config prints a loadable config") {
  const auto dir = scratch("dump");
  const auto o = cli("project --seed 99 --set projection.n=2 --dump-config", dir);
  REQUIRE(o.code == 0);
  CHECK(contains(o.out, "seed = 99"));
  write_text(dir / "dumped.toml", o.out);
  const auto again = cli("project --config \"" + (dir / "dumped.toml").string() + "\" --dump-config", dir);
  CHECK(again.code == 0);
  CHECK(again.out == o.out);
}

TEST_CASE("runs write their artifacts and are bit-reproducible across thread counts") {
  const auto dir = scratch("repro");
  const std::string common = "verify-liouville --count 400 --seed 5 --set 'flow.times=[0.5]' ";
  const auto a = cli(common + "--threads 1 --out \"" + (dir / "a").string() + "\"", dir);
  const auto b = cli(common + "--threads 4 --out \"" + (dir / "b").string() + "\"", dir);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* name : {"results.json", "results.csv", "verdicts.csv", "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "a" / name));
  }
  CHECK(read_text(dir / "a" / "results.csv") == read_text(dir / "b" / "results.csv"));
  CHECK(read_text(dir / "a" / "results.json") == read_text(dir / "b" / "results.json"));
  CHECK(contains(a.out, "max_abs_z"));

  const auto s = cli("sample --count 50 --seed 2 --out \"" + (dir / "s").string() + "\"", dir);
  REQUIRE(s.code == 0);
  CHECK(fs::exists(dir / "s" / "ensemble" / "samples.bin"));
  const auto manifest = liouvlab::io::json::parse(read_text(dir / "s" / "manifest.json"));
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest["config"]["measure"]["seed"] == 2);
}

TEST_CASE("every subcommand writes the documented CSV and JSON schemas") {
  const auto dir = scratch("schemas");
  const std::vector<std::pair<std::string, std::string>> results = {
      {"sample", "experiment,mode_index,k0,k1,lambda,mean_abs2,se,oracle,z"},
      {"evolve", "experiment,sample,weight,mass_drift,hamiltonian_drift"},
      {"verify-liouville",
       "experiment,estimator,t,dt_fd,F_descriptor,lhs,rhs,residual,se_lhs,se_rhs,se_paired,z,excluded_mass,test_se,"
       "control"},
      {"verify-invariance", "experiment,t,F_descriptor,mean_initial,mean_evolved,drift,se,z,dt_bias,allowed,excluded_mass"},
      {"counterexample",
       "experiment,quantity,count,horizon,value,se,oracle,z,q0,p0,blowup_lower,blowup_upper,expected_blowup,"
       "p_escape_time"},
      {"project",
       "experiment,estimator,t,dt_fd,F_descriptor,lhs,rhs,residual,se_lhs,se_rhs,se_paired,z,excluded_mass,test_se,"
       "control,bandwidth"},
      {"mollify", "lhs,rhs,slack,grid_mass,tolerance,grid_ok,holds,experiment,check"},
      {"integrability", "experiment,part,window,integral,relative_change,clip,clipped_mean,increment,relative_increment"},
      {"global-fraction", "experiment,flow,horizon,fraction,se,excluded_mass"},
  };
  const std::map<std::string, std::pair<std::string, std::string>> extra = {
      {"evolve", {"trajectory.csv", "t,re_0,im_0"}},
      {"counterexample", {"blowup_times.csv", "blowup_time"}},
      {"project", {"projection.csv", "y_0,y_1,y_2,y_3,v_0"}},
      {"mollify", {"mollify.csv", "x_0,x_1,density,v_0,v_1"}},
  };
  for (const auto& [name, header] : results) {
    CAPTURE(name);
    const auto out = dir / name;
    const auto o = cli(name + " --count 200 --seed 3 --out \"" + out.string() + "\"", dir);
    REQUIRE(o.code <= 1);
    CHECK(first_line(read_text(out / "results.csv")) == header);
    CHECK(first_line(read_text(out / "verdicts.csv")) == "name,status,measured,relation,tolerance,note");
    const auto res = liouvlab::io::json::parse(read_text(out / "results.json"));
    for (const char* key : {"schema_version", "experiment", "seed", "count", "records", "summary", "verdicts"}) {
      CHECK(res.contains(key));
    }
    CHECK(res["experiment"] == name);
    CHECK(res["records"].is_array());
    const auto manifest = liouvlab::io::json::parse(read_text(out / "manifest.json"));
    for (const char* key : {"tool", "config", "config_toml", "config_hash", "outputs", "versions", "threads"}) {
      CHECK(manifest.contains(key));
    }
    if (const auto it = extra.find(name); it != extra.end()) {
      CHECK(first_line(read_text(out / it->second.first)).rfind(it->second.second, 0) == 0);
    }
  }
}
