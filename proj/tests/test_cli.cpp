#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const std::string kCli = STARCOOL_CLI_PATH;
const std::string kConfigDir = STARCOOL_CONFIG_DIR;
const std::string kTestdataDir = STARCOOL_TESTDATA_DIR;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  const fs::path out_path = fs::temp_directory_path() / "starcool_cli_stdout.txt";
  const fs::path err_path = fs::temp_directory_path() / "starcool_cli_stderr.txt";
  const std::string cmd = kCli + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  fs::remove(out_path);
  fs::remove(err_path);
  return r;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("simulate writes a well-formed trace") {
  const fs::path out = temp_file("cli_trace.csv");
  const RunResult r =
      run_cli("simulate " + kConfigDir + "/fig2_cooling_trace.conf " + out.string());
  INFO(r.err);
  REQUIRE(r.exit_code == 0);

  const auto lines = lines_of(slurp(out));
  REQUIRE(lines.size() == 18);  // banner + header + 16 rows
  REQUIRE(lines[0].rfind("# starcool 1.0.0 config=", 0) == 0);
  REQUIRE(lines[0].find("seed=") != std::string::npos);
  REQUIRE(lines[1] == "n,magnetization,spin_temperature_k");
  REQUIRE(lines[2].rfind("0,1,298", 0) == 0);
  fs::remove(out);
}

TEST_CASE("unknown config key fails fast with the key and line") {
  const fs::path cfg = temp_file("cli_bad_key.conf");
  {
    std::ofstream f(cfg);
    f << "[system]\nn_reset = 4\nt1_compp = 5\n";
  }
  const fs::path out = temp_file("cli_bad_key_out.csv");
  const RunResult r = run_cli("simulate " + cfg.string() + " " + out.string());
  REQUIRE(r.exit_code == 2);
  REQUIRE(r.err.find("t1_compp") != std::string::npos);
  REQUIRE(r.err.find("line 3") != std::string::npos);
  fs::remove(cfg);
}

TEST_CASE("syntactically valid but unphysical values exit with the domain code") {
  const fs::path cfg = temp_file("cli_bad_domain.conf");
  {
    std::ofstream f(cfg);
    f << "[system]\nn_reset = 4\nt1_comp = -5\n";
  }
  const fs::path out = temp_file("cli_bad_domain_out.csv");
  const RunResult r = run_cli("simulate " + cfg.string() + " " + out.string());
  REQUIRE(r.exit_code == 3);
  fs::remove(cfg);
}

TEST_CASE("missing measured-data file exits with code 4") {
  const fs::path out = temp_file("cli_fit_out.csv");
  const RunResult r = run_cli("fit-eta " + kConfigDir + "/fit_eta_demo.conf " + out.string() +
                              " --data /nonexistent/measured.csv");
  REQUIRE(r.exit_code == 4);
}

TEST_CASE("fit-eta reproduces the committed round-trip fixture") {
  const fs::path out = temp_file("cli_fit_demo.csv");
  const RunResult r = run_cli("fit-eta " + kConfigDir + "/fit_eta_demo.conf " + out.string() +
                              " --data " + kTestdataDir + "/measured_demo.csv");
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  const std::string text = slurp(out);
  const auto pos = text.find("# residual=");
  REQUIRE(pos != std::string::npos);
  const double residual = std::stod(text.substr(pos + 11));
  REQUIRE(residual < 1e-8);
  fs::remove(out);
}

TEST_CASE("reruns are byte identical") {
  const fs::path a = temp_file("cli_rerun_a.csv");
  const fs::path b = temp_file("cli_rerun_b.csv");
  REQUIRE(run_cli("simulate " + kConfigDir + "/fig2_cooling_trace.conf " + a.string()).exit_code == 0);
  REQUIRE(run_cli("simulate " + kConfigDir + "/fig2_cooling_trace.conf " + b.string()).exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("sweep output matches for different thread counts") {
  const fs::path a = temp_file("cli_threads_1.csv");
  const fs::path b = temp_file("cli_threads_4.csv");
  REQUIRE(run_cli("sweep " + kConfigDir + "/fig7_m_landscape.conf " + a.string() + " --threads 1")
              .exit_code == 0);
  REQUIRE(run_cli("sweep " + kConfigDir + "/fig7_m_landscape.conf " + b.string() + " --threads 4")
              .exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("committed golden outputs stay reproducible") {
  struct Golden {
    const char* subcommand;
    const char* config;
    const char* golden;
  };
  const std::vector<Golden> cases = {
      {"simulate", "fig2_cooling_trace.conf", "fig2_cooling_trace.csv"},
      {"sweep", "fig6_n_zigzag.conf", "fig6_n_zigzag.csv"},
      {"sweep", "fig7_m_landscape.conf", "fig7_m_landscape.csv"},
  };
  for (const auto& c : cases) {
    const fs::path out = temp_file(std::string("cli_golden_") + c.golden);
    const RunResult r = run_cli(std::string(c.subcommand) + " " + kConfigDir + "/" + c.config +
                                " " + out.string());
    INFO(c.config << ": " << r.err);
    REQUIRE(r.exit_code == 0);
    const std::string golden = slurp(fs::path(kTestdataDir) / "golden" / c.golden);
    REQUIRE_FALSE(golden.empty());
    REQUIRE(slurp(out) == golden);
    fs::remove(out);
  }
}

TEST_CASE("coherence output matches for different thread counts") {
  const fs::path cfg = temp_file("cli_coherence_threads.conf");
  {
    std::ofstream f(cfg);
    f << "[coherence]\nq_list = 1,3\ntrajectories = 1000\nt_count = 20\nseed = 9\n";
  }
  const fs::path a = temp_file("cli_coh_1.csv");
  const fs::path b = temp_file("cli_coh_4.csv");
  REQUIRE(run_cli("coherence " + cfg.string() + " " + a.string() + " --threads 1").exit_code == 0);
  REQUIRE(run_cli("coherence " + cfg.string() + " " + b.string() + " --threads 4").exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
  fs::remove(cfg);
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("two-step AC comparison mode and explicit background are accepted") {
  const fs::path cfg = temp_file("cli_two_step.conf");
  {
    std::ofstream f(cfg);
    f << "[system]\nn_reset = 4\ngamma = 2\nt1_comp = 100\nt1_reset = 1\nbackground = 7\n"
      << "[schedule]\niterations = 5\nm = 2\ntau_hb = 3\nac_model = two_step\n";
  }
  const fs::path out = temp_file("cli_two_step_out.csv");
  const RunResult r = run_cli("simulate " + cfg.string() + " " + out.string());
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  REQUIRE(lines_of(slurp(out)).size() == 8);  // banner + header + 6 rows
  fs::remove(cfg);
  fs::remove(out);
}

TEST_CASE("steady-state subcommand reports the fixed point") {
  const fs::path out = temp_file("cli_steady.csv");
  const RunResult r =
      run_cli("steady-state " + kConfigDir + "/fig2_cooling_trace.conf " + out.string());
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  const std::string text = slurp(out);
  REQUIRE(text.find("j,p0,p1") != std::string::npos);
  REQUIRE(text.find("# m_inf=") != std::string::npos);
  fs::remove(out);
}

TEST_CASE("coherence subcommand writes one row per order plus the regression footer") {
  const fs::path cfg = temp_file("cli_coherence_small.conf");
  {
    std::ofstream f(cfg);
    f << "[coherence]\nq_list = 1,2,3,4,5,6,7,8,9\ntrajectories = 400\nt_count = 30\nseed = 5\n";
  }
  const fs::path out = temp_file("cli_rates.csv");
  const RunResult r = run_cli("coherence " + cfg.string() + " " + out.string());
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(slurp(out));
  // banner + header + 9 rows + regression footer
  REQUIRE(lines.size() == 12);
  REQUIRE(lines[1] == "q,gamma_per_s,stderr");
  REQUIRE(lines[11].rfind("# fit_slope=", 0) == 0);
  fs::remove(cfg);
  fs::remove(out);
}
