// Integration tests for the qfix binary: exit codes, output shapes and
// determinism. Arguments: <path-to-qfix> <data-dir>.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

namespace {

int checks = 0;
int failures = 0;

void expect(bool ok, const std::string& what) {
  ++checks;
  if (!ok) {
    ++failures;
    std::cerr << "[FAIL] " << what << "\n";
  }
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& cmd) {
  RunResult r;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: qfix_cli_tests <qfix-binary> <data-dir>\n";
    return 2;
  }
  const std::string bin = argv[1];
  const std::string data = argv[2];

  {
    const RunResult r = run(bin + " pattern mu --in " + data + "/patterns/half_quarter.json" +
                            " --slot 1");
    expect(r.exit_code == 0, "pattern mu exit code");
    expect(contains(r.output, "{\"arity\": 1, \"tuples\": [[0.5]]}"), "pattern mu output: " +
                                                                          r.output);
  }
  {
    const RunResult r = run(bin + " pattern modulus --in " + data +
                            "/patterns/half_quarter.json --slot 2");
    expect(r.exit_code == 0, "pattern modulus exit code");
    expect(contains(r.output, "0.25"), "pattern modulus output");
  }
  {
    const RunResult r = run(bin + " pattern compose --in " + data + "/patterns/join.json" +
                            " --inner " + data + "/patterns/mix04_wide.json " + data +
                            "/patterns/third_slot.json");
    expect(r.exit_code == 0, "pattern compose exit code");
    expect(contains(r.output, "[[0.4, 0.6, 0], [0, 0, 1]]"),
           "pattern compose output: " + r.output);
  }
  {
    const RunResult r =
        run(bin + " pattern contract --in " + data + "/patterns/join.json --i 1 --j 2");
    expect(r.exit_code == 0, "pattern contract exit code");
    expect(contains(r.output, "{\"arity\": 1, \"tuples\": [[1]]}"),
           "pattern contract output: " + r.output);
  }
  {
    const RunResult r = run(bin + " prove " + data + "/derivations/banach_chain.json");
    expect(r.exit_code == 0, "prove accepts the packaged chain");
    expect(contains(r.output, "ACCEPTED"), "prove output");
  }
  {
    const RunResult r = run(bin + " --json prove " + data + "/derivations/approx_instance.json");
    expect(r.exit_code == 0, "prove --json exit code");
    expect(contains(r.output, "{\"accepted\": true}"), "prove --json output: " + r.output);
  }
  {
    // corrupt one epsilon and expect a step-2 rejection
    std::ifstream in(data + "/derivations/banach_chain.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["steps"][1]["conclusion"]["conclusion"]["eps"] = 0.02;
    const std::string tmp = "/tmp/qfix_corrupt_chain.json";
    std::ofstream out(tmp);
    out << doc.dump();
    out.close();
    const RunResult r = run(bin + " prove " + tmp);
    expect(r.exit_code == 1, "prove rejects the corrupted chain");
    expect(contains(r.output, "REJECTED step=2 reason=WrongEpsilon"),
           "prove rejection output: " + r.output);
  }
  {
    const RunResult r = run(bin + " solve --model " + data + "/models/affine_half.json" +
                            " --term " + data + "/terms/mu_f.json --eps 1e-8");
    expect(r.exit_code == 0, "solve exit code");
    const auto doc = nlohmann::json::parse(r.output, nullptr, false);
    expect(!doc.is_discarded(), "solve emits JSON");
    if (!doc.is_discarded()) {
      expect(std::abs(doc["value"][0].get<double>() - 0.5) <= 1e-8, "solve value");
      expect(doc["modulus"].get<double>() == 0.5, "solve modulus");
      expect(doc.contains("a_priori") && doc.contains("a_posteriori"), "solve bounds");
    }
  }
  {
    const RunResult r = run(bin + " solve --model " + data + "/models/affine_half.json" +
                            " --term " + data + "/terms/mu_f.json --eps 1e-8 --seed-value " +
                            data + "/terms/seed_point9.json");
    expect(r.exit_code == 0, "solve with a custom seed");
    const auto doc = nlohmann::json::parse(r.output, nullptr, false);
    expect(!doc.is_discarded() && std::abs(doc["value"][0].get<double>() - 0.5) <= 1e-8,
           "seeded solve converges to the same fixed point");
  }
  {
    // kantorovich-model solve: the 0.3-mix fixed point tracks its parameter
    const RunResult r = run(bin + " solve --model " + data +
                            "/models/distribution_mix.json --term " + data +
                            "/terms/mu_mix.json --eps 1e-9");
    expect(r.exit_code == 0, "distribution solve exit code");
    const auto doc = nlohmann::json::parse(r.output, nullptr, false);
    expect(!doc.is_discarded(), "distribution solve emits JSON");
    if (!doc.is_discarded()) {
      const auto masses = doc["value"]["masses"];
      expect(std::abs(masses[0].get<double>() - 0.2) <= 1e-6 &&
                 std::abs(masses[1].get<double>() - 0.5) <= 1e-6 &&
                 std::abs(masses[2].get<double>() - 0.3) <= 1e-6,
             "distribution solve tracks the parameter");
    }
  }
  {
    // union is not contractive anywhere, so the solve is rejected
    const RunResult r = run(bin + " solve --model " + data +
                            "/models/pointset_union.json --term " + data +
                            "/terms/mu_union.json --eps 1e-6");
    expect(r.exit_code == 1, "non-contractive solve is rejected: got " +
                                 std::to_string(r.exit_code));
  }
  {
    const RunResult r = run(bin + " laws --law dinaturality --spec " + data +
                            "/laws/dinaturality_affine.json --eps 1e-8");
    expect(r.exit_code == 0, "laws dinaturality exit code");
    expect(contains(r.output, "verdict=PASS"), "laws dinaturality verdict");
  }
  {
    const RunResult r = run(bin + " laws --law diagonal --spec " + data +
                            "/laws/diagonal_affine.json --eps 1e-8");
    expect(r.exit_code == 0, "laws diagonal exit code");
  }
  {
    const RunResult r = run(bin + " laws --law amalgamation --spec " + data +
                            "/laws/amalgamation_affine.json --eps 1e-8");
    expect(r.exit_code == 0, "laws amalgamation exit code");
  }
  {
    const RunResult r = run(bin + " mdp eval --mdp " + data + "/mdp/chain2.json --policy " +
                            data + "/mdp/chain2_policy.json --eps 1e-8");
    expect(r.exit_code == 0, "mdp eval exit code");
    const auto doc = nlohmann::json::parse(r.output, nullptr, false);
    expect(!doc.is_discarded(), "mdp eval emits JSON");
    if (!doc.is_discarded()) {
      expect(std::abs(doc["value"][0].get<double>() - 0.5) <= 1e-8, "chain value s1");
      expect(std::abs(doc["value"][1].get<double>() - 1.0) <= 1e-8, "chain value s2");
    }
  }
  {
    const RunResult r = run(bin + " mdp eval --mdp " + data + "/mdp/chain2.json --policy " +
                            data + "/mdp/chain2_tree.json --eps 1e-8");
    expect(r.exit_code == 0, "mdp eval accepts policy trees");
  }
  {
    const RunResult a = run(bin + " --seed 7 mdp axioms --mdp " + data +
                            "/mdp/chain2.json --trials 50");
    const RunResult b = run(bin + " --seed 7 mdp axioms --mdp " + data +
                            "/mdp/chain2.json --trials 50");
    expect(a.exit_code == 0, "mdp axioms exit code");
    expect(contains(a.output, "axiom=B1"), "mdp axioms report");
    expect(contains(a.output, "# sampling:"), "mdp axioms documents its sampling");
    expect(a.output == b.output, "identical seeds give byte-identical output");
    // the global flag is also accepted after the subcommand
    const RunResult c = run(bin + " mdp axioms --mdp " + data +
                            "/mdp/chain2.json --trials 50 --seed 7");
    expect(c.exit_code == 0 && c.output == a.output, "trailing --seed matches");
  }
  {
    const RunResult r = run(bin + " analyze --sig " + data + "/signatures/basic.json" +
                            " --term \"orr(plus03(x1, x2), x3)\"");
    expect(r.exit_code == 0, "analyze term exit code");
    expect(contains(r.output, "[0.3, 0.7, 0]") && contains(r.output, "[0, 0, 1]"),
           "analyze reports the inferred pattern: " + r.output);
    expect(contains(r.output, "slot=3 modulus=1 not-contractive"),
           "analyze reports per-slot moduli");
  }
  {
    const RunResult r = run(bin + " analyze --sig " + data + "/signatures/basic.json" +
                            " --term \"mu 1. orr(x1, x2)\"");
    expect(r.exit_code == 1, "analyze rejects a non-contractive binder");
  }
  {
    const RunResult r = run(bin + " analyze --model " + data +
                            "/models/distribution_mix.json --trials 200");
    expect(r.exit_code == 0, "analyze compliance exit code");
    expect(contains(r.output, "symbol=mix03"), "analyze compliance report");
  }
  {
    const RunResult r = run(bin + " analyze --model " + data +
                            "/models/pointset_union.json --trials 200");
    expect(r.exit_code == 0, "analyze pointset compliance exit code");
  }
  {
    const RunResult r = run(bin + " prove /nonexistent/file.json");
    expect(r.exit_code == 2, "missing file reports an input error");
  }
  {
    // schema violation: transitions row does not sum to one
    std::ifstream in(data + "/mdp/chain2.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["transitions"]["go"][0][1] = 0.9;
    const std::string tmp = "/tmp/qfix_bad_mdp.json";
    std::ofstream out(tmp);
    out << doc.dump();
    out.close();
    const RunResult r = run(bin + " mdp eval --mdp " + tmp + " --policy " + data +
                            "/mdp/chain2_policy.json --eps 1e-6");
    expect(r.exit_code == 2, "invalid mdp reports an input error");
  }
  {
    // determinism of solve output
    const std::string cmd = bin + " solve --model " + data + "/models/affine_half.json" +
                            " --term " + data + "/terms/mu_f.json --eps 1e-8";
    expect(run(cmd).output == run(cmd).output, "solve output is deterministic");
  }

  std::cout << (failures == 0 ? "PASS" : "FAIL") << " cli integration: " << (checks - failures)
            << "/" << checks << " checks\n";
  return failures == 0 ? 0 : 1;
}
