// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "holomem/cli.hpp"
#include "holomem/engine.hpp"
#include "holomem/experiments.hpp"
#include "holomem/sequence.hpp"
#include "oracle/event_compare.hpp"
#include "oracle/grammar_oracle.hpp"
#include "oracle/programs.hpp"
#include "oracle/scalar_oracle.hpp"

using namespace holomem;
using namespace holomem::seq;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path source(const std::string& rel) { return fs::path(HOLOMEM_SOURCE_DIR) / rel; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Collects failed sub-checks for one criterion.
struct Verdict {
  std::vector<std::string> failed;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

int failures = 0;

void criterion(int n, const std::string& title, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.failed.push_back(std::string("exception: ") + e.what());
  }
  const bool ok = v.failed.empty();
  failures += !ok;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << title;
  const auto& detail = ok ? v.notes : v.failed;
  for (std::size_t i = 0; i < detail.size(); ++i) std::cout << (i ? "; " : " (") << detail[i];
  std::cout << (detail.empty() ? "" : ")") << std::endl;
}

void require_comparisons(Verdict& v, const ExperimentResult& r) {
  for (const auto& c : r.comparisons)
    v.require(c.pass, r.experiment + "." + c.name + "=" + fmt(c.value) + " theory " + fmt(c.theory) +
                          " tol " + fmt(c.tolerance));
}

double max_state_diff(const Ensemble& e, const oracle::Model& m) {
  double d = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& s = m.spins()[i];
    d = std::max({d, std::abs(e.sx[i] - s.mx), std::abs(e.sy[i] - s.my), std::abs(e.sz[i] - s.mz),
                  std::abs(e.an_re[i] - s.a.real()), std::abs(e.an_im[i] - s.a.imag())});
  }
  return d;
}

std::vector<fs::path> corpus() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(source("sequences")))
    if (e.path().extension() == ".seq") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SequenceEvent> compile_file(const std::string& name, const ParamMap& params = {}) {
  return compile(parse_sequence(slurp(source("sequences") / name)), params);
}

// Parser outcome, or nullopt for anything other than a clean accept/reject.
std::optional<bool> parser_accepts(const std::string& text) {
  try {
    parse_sequence(text);
    return true;
  } catch (const SequenceError&) {
    return false;
  } catch (...) {
    return std::nullopt;
  }
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "holomem");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::main(static_cast<int>(argv.size()), argv.data(), {out, err});
}

}  // namespace

int main() {
  criterion(1, "mode-overlap curve at N=1e5", [](Verdict& v) {
    const auto t0 = Clock::now();
    const auto r = run_experiment("fig1a", {});
    const double dt = seconds_since(t0);
    require_comparisons(v, r);
    v.require(dt < 60.0, "runtime " + fmt(dt) + " s");
    v.require(r.config.at("n_spins") == "100000", "n_spins " + r.config.at("n_spins"));
    const auto& curve = r.curves.at("fig1a_intensity");
    v.require(curve.front().x == 0.0 && curve.back().x >= 12.0, "k r0 range");
    v.note("rms " + fmt(r.comparison("intensity_rms_deviation").value));
    v.note("zeros " + fmt(r.comparison("zero_1_kr0").value) + ", " + fmt(r.comparison("zero_2_kr0").value));
    v.note(fmt(dt) + " s");
  });

  criterion(2, "crosstalk laws on a 10x10 grid", [](Verdict& v) {
    const auto t0 = Clock::now();
    const auto r = run_experiment("crosstalk", {});
    const double dt = seconds_since(t0);
    require_comparisons(v, r);
    v.require(r.crosstalk.size() == 100, "grid size " + std::to_string(r.crosstalk.size()));
    double e1 = 0, e2 = 0;
    for (const auto& c : r.crosstalk) {
      const auto [d1, d2] = crosstalk_theory(c.theta1, c.theta2);
      e1 = std::max(e1, std::abs(c.D1 - d1));
      e2 = std::max(e2, std::abs(c.D2 - d2));
    }
    v.require(e1 < 0.005 && e2 < 0.005, "max deviation " + fmt(e1) + ", " + fmt(e2));
    v.require(dt < 120.0, "runtime " + fmt(dt) + " s");
    v.note("max |dD1| " + fmt(e1) + ", max |dD2| " + fmt(e2) + ", " + fmt(dt) + " s");
  });

  criterion(3, "100-register stack", [](Verdict& v) {
    const ExperimentSettings s("fig3a", {});
    const auto r = experiment_fig3a(s);
    require_comparisons(v, r);
    const auto symbols = symbols_from_pattern(kFig3aPattern);
    v.require(symbols.size() == 100, "register count");
    int correct = 0;
    for (std::size_t k = 0; k < r.echoes.size(); ++k) correct += r.echoes[k].symbol == symbols[99 - k];
    v.require(correct == 100, "decoded " + std::to_string(correct) + "/100");
    const double tip = s.number("tip_pi", 0.009);
    v.require(tip < 0.01, "tip " + fmt(tip) + " pi");
    v.require(s.us("pulse_spacing_us", 3.0) == 3e-6, "spacing");

    // Effective dephasing time from a free induction decay on the same ensemble.
    Ensemble e = build_ensemble(s.ensemble());
    Engine eng(s.threads());
    eng.microwave_pulse(e, 0.5 * pi, 0.0);
    const Signal fid = eng.acquire(e, 5e-6, 1e-8);
    const double m0 = std::abs(fid.m_plus.front());
    double t_star = INFINITY;
    for (std::size_t k = 0; k < fid.size(); ++k)
      if (std::abs(fid.m_plus[k]) < m0 / std::exp(1.0)) {
        t_star = fid.t[k] - fid.t.front();
        break;
      }
    v.require(t_star <= 2e-6, "effective T2* " + fmt(t_star * 1e6) + " us");
    v.require(s.ensemble().relaxation.T2 == 450e-6, "T2");
    v.note("100/100 decoded, effective T2* " + fmt(t_star * 1e6) + " us, envelope rms " +
           fmt(r.comparison("envelope_rms_relative").value));
  });

  criterion(4, "arbitrary-order recall", [](Verdict& v) {
    for (const char* name : {"fig2a", "fig2b"}) {
      const auto r = run_experiment(name, {});
      require_comparisons(v, r);
      int pairs = 0;
      for (const auto& c : r.comparisons) pairs += c.name.rfind("decoded[", 0) == 0;
      v.require(pairs == 2, std::string(name) + " phase pairs " + std::to_string(pairs));
    }
    v.note("(+x,-x) and (+x,+y) in both orders");
  });

  criterion(5, "nuclear round trip", [](Verdict& v) {
    const auto r = run_experiment("fig3b", {});
    require_comparisons(v, r);
    v.require(r.comparison("decoded_reverse_order").value == 8.0, "decoded");
    v.require(r.comparison("echoes_without_return_transfer").value == 0.0, "stray echoes");

    auto c = oracle::rich_config();
    c.n_spins = 1000;
    c.transfer_fidelity = 1.0;
    auto e = oracle::scrambled(c, 5);
    const auto before = e;
    Engine eng;
    eng.transfer(e, TransferDirection::E2N);
    eng.transfer(e, TransferDirection::N2E);
    double d = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
      d = std::max({d, std::abs(e.sx[i] - before.sx[i]), std::abs(e.sy[i] - before.sy[i]),
                    std::abs(e.sz[i] - before.sz[i]), std::abs(e.an_re[i] - before.an_re[i]),
                    std::abs(e.an_im[i] - before.an_im[i])});
    v.require(d <= 1e-12, "round trip error " + fmt(d));
    v.note("8/8 decoded, 0 stray echoes, round trip error " + fmt(d));
  });

  criterion(6, "scalar oracle equivalence", [](Verdict& v) {
    double worst = 0.0;
    std::size_t events = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      auto e = oracle::scrambled(oracle::rich_config(), seed);
      oracle::Model m(e);
      Engine eng;
      for (const auto& ev : oracle::random_program(seed * 7919, 40)) {
        Signal got, want;
        const bool acq = eng.apply(e, ev, &got);
        m.apply(ev, &want);
        if (acq) {
          v.require(got.size() == want.size(), "acquisition length");
          for (std::size_t k = 0; k < std::min(got.size(), want.size()); ++k)
            worst = std::max(worst, std::abs(got.m_plus[k] - want.m_plus[k]));
        }
        worst = std::max(worst, max_state_diff(e, m));
        ++events;
      }
    }
    v.require(worst <= 1e-12, "max oracle deviation " + fmt(worst));

    EnsembleConfig c;
    c.n_spins = 2000;
    c.relaxation = {INFINITY, 1e-6, INFINITY, INFINITY};
    auto base = build_ensemble(c);
    for (auto& d : base.delta) d = 0.0;
    Engine eng;
    auto e = base;
    eng.microwave_pulse(e, 0.5 * pi, 0.0);
    const auto m0 = eng.magnetization(e);
    auto a = e;
    eng.gradient(a, 0.03, 1.3e-6);
    const double dephased = std::abs(eng.magnetization(a));
    eng.gradient(a, -0.03, 1.3e-6);
    const double undo = std::abs(eng.magnetization(a) - m0);
    auto b = e;
    eng.gradient(b, 0.03, 1.3e-6);
    eng.microwave_pulse(b, pi, 0.5 * pi);
    eng.gradient(b, 0.03, 1.3e-6);
    const auto expected = -std::conj(m0);
    double spread = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      spread = std::max(spread, std::abs(std::complex<double>(b.sx[i], b.sy[i]) - expected));
    v.require(dephased < 0.1, "gradient did not dephase");
    v.require(undo <= 1e-12, "gradient/-gradient residual " + fmt(undo));
    v.require(spread <= 1e-9, "gradient-pi-gradient residual " + fmt(spread));
    v.note(std::to_string(events) + " events, max deviation " + fmt(worst));
  });

  criterion(7, "sequence parser suite", [](Verdict& v) {
    const auto files = corpus();
    v.require(files.size() >= 20, "corpus size " + std::to_string(files.size()));
    std::vector<std::string> texts;
    for (const auto& f : files) {
      texts.push_back(slurp(f));
      const auto ast = parse_sequence(texts.back());
      const auto printed = print(ast);
      v.require(parse_sequence(printed) == ast && print(parse_sequence(printed)) == printed,
                "round trip " + f.filename().string());
      compile(ast);
    }

    int crashes = 0, false_accepts = 0, false_rejects = 0, trials = 0;
    auto judge = [&](const std::string& s) {
      ++trials;
      const auto got = parser_accepts(s);
      if (!got) {
        ++crashes;
        return;
      }
      const bool want = grammar_oracle::oracle_accepts(s);
      false_accepts += *got && !want;
      false_rejects += !*got && want;
    };
    std::mt19937_64 g(2024);
    for (int k = 0; k < 20000; ++k) {
      std::string s(g() % 60, '\0');
      for (auto& ch : s) ch = static_cast<char>(g() % 256);
      judge(s);
    }
    const std::string alphabet = "pulsegradwaitrfpulsetransferacquireletrepeatangle=phase=G=dur=dt=e2nn2e"
                                 "0123456789.+-eE$[]{};,# \t\n/xyipiradegmTnsusmsi\x01\x7f\xff";
    for (int k = 0; k < 20000; ++k) {
      std::string s = texts[g() % texts.size()];
      const int edits = 1 + static_cast<int>(g() % 3);
      for (int j = 0; j < edits && !s.empty(); ++j) {
        const std::size_t pos = g() % s.size();
        switch (g() % 3) {
          case 0: s[pos] = alphabet[g() % alphabet.size()]; break;
          case 1: s.erase(pos, 1); break;
          default: s.insert(pos, 1, alphabet[g() % alphabet.size()]); break;
        }
      }
      judge(s);
    }
    v.require(crashes == 0, std::to_string(crashes) + " crashes");
    v.require(false_accepts == 0, std::to_string(false_accepts) + " false accepts");
    v.require(false_rejects == 0, std::to_string(false_rejects) + " false rejects");

    auto same = [&](const std::string& what, const std::vector<SequenceEvent>& got,
                    const std::vector<SequenceEvent>& want) {
      const auto m = event_compare::mismatch(got, want);
      v.require(m.empty(), what + ": " + m);
    };
    const ExperimentSettings nc60("fig1a", {}), nc60_2("fig2a", {}), psi("fig3a", {}), psi_b("fig3b", {});
    const double th = pi / 6.0;
    same("fig1a", compile_file("fig1a.seq"), fig1a_program(nc60, 0.030));
    same("fig1b", compile_file("fig1b.seq"), fig1b_program(nc60, true));
    same("hahn", compile_file("hahn.seq"), fig1b_program(nc60, false));
    same("fig2a", compile_file("fig2a_same.seq"), fig2_program(nc60_2, RecallOrder::Same, th, 0.0, th, pi));
    same("fig2b", compile_file("fig2b_inverse.seq"), fig2_program(nc60_2, RecallOrder::Inverse, th, 0.0, th, pi));
    same("fig3a", compile_file("fig3a.seq"), fig3a_program(psi, symbols_from_pattern(kFig3aPattern)));
    same("fig3b", compile_file("fig3b.seq"), fig3b_program(psi_b, symbols_from_pattern(kFig3bPattern), true));
    same("fig3b_no_return", compile_file("fig3b_no_return.seq"),
         fig3b_program(psi_b, symbols_from_pattern(kFig3bPattern), false));
    v.note(std::to_string(files.size()) + " corpus files, " + std::to_string(trials) +
           " fuzz inputs, figure programs match");
  });

  criterion(8, "determinism and performance", [](Verdict& v) {
    const fs::path dir = fs::temp_directory_path() / "holomem_acceptance";
    fs::remove_all(dir);
    const std::string seq = source("sequences/fig3a.seq").string(), cfg = source("configs/psi.cfg").string();
    auto cli_run = [&](const std::string& out, const std::string& threads) {
      return run_cli({"run", "--seq", seq, "--config", cfg, "--threads", threads, "--out", (dir / out).string()});
    };
    const auto t0 = Clock::now();
    v.require(cli_run("a.csv", "1") == 0, "run a");
    const double dt = seconds_since(t0);
    v.require(cli_run("b.csv", "1") == 0, "run b");
    v.require(cli_run("c.csv", "4") == 0, "run c");
    const auto a = slurp(dir / "a.csv");
    v.require(!a.empty() && a == slurp(dir / "b.csv"), "single-threaded output differs between runs");
    v.require(a == slurp(dir / "c.csv"), "four-thread output differs");

    const auto events = compile_file("fig3a.seq");
    v.require(std::count_if(events.begin(), events.end(),
                            [](const auto& e) { return std::holds_alternative<MicrowavePulse>(e); }) == 101,
              "pulse count");
    const ExperimentSettings s("fig3a", {});
    Ensemble e1 = build_ensemble(s.ensemble()), e4 = e1;
    const auto r1 = Engine(1).run(e1, events), r4 = Engine(4).run(e4, events);
    double drift = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < r1.signals.at(0).size(); ++k) {
      drift = std::max(drift, std::abs(r1.signals[0].m_plus[k] - r4.signals.at(0).m_plus[k]));
      peak = std::max(peak, std::abs(r1.signals[0].m_plus[k]));
    }
    v.require(drift <= 1e-12 * peak, "thread drift " + fmt(drift / peak));
    v.require(dt < 5.0, "runtime " + fmt(dt) + " s");
    v.note("byte-identical CSV, relative drift " + fmt(drift / peak) + ", 101-pulse run on 1e5 spins in " +
           fmt(dt) + " s");
    fs::remove_all(dir);
  });

  return failures == 0 ? 0 : 1;
}
