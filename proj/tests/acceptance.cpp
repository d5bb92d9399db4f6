// Acceptance run: one PASS/FAIL line per criterion, each against the shipped
// configs. Exit status is the number of failed criteria (capped at 1).

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "hypo/hypo.hpp"

#ifndef HYPO_CONFIG_DIR
#define HYPO_CONFIG_DIR "configs"
#endif

namespace {

using namespace hypo;

Config load(const std::string& name) { return load_config(std::string(HYPO_CONFIG_DIR) + "/" + name + ".json"); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const AuditEntry* entry(const AuditReport& rep, const std::string& check) { return rep.find(check); }

void require_entry(Outcome& o, const AuditReport& rep, const std::string& check, const std::string& who) {
  const AuditEntry* e = entry(rep, check);
  if (!e) {
    o.require(false, who + " " + check + " missing");
    return;
  }
  o.require(e->pass, who + " " + check + " = " + fmt_double(e->headline()) + (e->note.empty() ? "" : " " + e->note));
}

void require_all(Outcome& o, const AuditReport& rep, const std::string& who) {
  if (rep.entries.empty()) o.require(false, who + " produced no entries");
  for (const auto& e : rep.entries)
    o.require(e.pass, who + " " + e.check + " = " + fmt_double(e.headline()) + (e.note.empty() ? "" : " " + e.note));
}

void require_runtime(Outcome& o, double secs, double budget) {
  o.require(secs < budget, "runtime " + fmt_double(secs) + " s over " + fmt_double(budget) + " s");
}

const std::vector<std::string> kShipped{"heat-1d", "heat-Nd", "kolmogorov-2d", "kolmogorov-perturbed",
                                        "degenerate-nonhypo", "chain-3"};
const std::vector<std::string> kHypoelliptic{"heat-1d", "heat-Nd", "kolmogorov-2d", "kolmogorov-perturbed", "chain-3"};

Outcome criterion1() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  for (const char* name : {"kolmogorov-2d", "chain-3", "degenerate-nonhypo"}) {
    Config cfg = load(name);
    cfg.t0s = {0.1, 1.0, 10.0};
    AuditEntry e = audit_hypoellipticity(cfg.op, cfg.t0s);
    bool expect = std::string(name) != "degenerate-nonhypo";
    o.require(e.get("agreement") == 1.0, std::string(name) + " verdict depends on t0");
    o.require(e.get("hypoelliptic") == (expect ? 1.0 : 0.0), std::string(name) + " misclassified");
  }
  // The CLI path reports the same verdicts.
  o.require(cmd_validate(load("kolmogorov-2d")).all_pass(), "validate kolmogorov-2d not clean");
  o.require(!cmd_validate(load("degenerate-nonhypo")).all_pass(), "validate degenerate-nonhypo passed");
  double secs = seconds_since(t0);
  require_runtime(o, secs, 1.0);
  o.detail = "runtime " + fmt_double(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion2() {
  Outcome o;
  Config kol = load("kolmogorov-2d");
  Mat C = covariance_C(kol.op, 1.0);
  Mat ref(2, 2);
  ref << 1.0, -0.5, -0.5, 1.0 / 3.0;
  double err = (C - ref).cwiseAbs().maxCoeff();
  o.require(err <= 1e-12, "C(1) error " + fmt_double(err));
  double worst_vl = 0, worst_q = 0;
  for (const auto& name : kShipped) {
    Config cfg = load(name);
    AuditEntry vl = audit_van_loan_quadrature(cfg.op, {0.25, 1.0, 2.0});
    AuditEntry q = audit_gramian_relation(cfg.op, {0.25, 1.0, 2.0});
    worst_vl = std::max(worst_vl, vl.headline());
    worst_q = std::max(worst_q, q.headline());
    o.require(vl.pass, name + " Van Loan vs quadrature " + fmt_double(vl.headline()));
    o.require(q.pass, name + " Q_t relation " + fmt_double(q.headline()));
  }
  std::string d = "C(1) err " + fmt_double(err) + ", Van Loan/quadrature " + fmt_double(worst_vl) + ", Q_t " +
                  fmt_double(worst_q);
  o.detail = d + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// Criteria 3 and 4 share one identities run per config.
std::vector<std::pair<std::string, AuditReport>> identity_reports(double& secs) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, AuditReport>> out;
  for (const auto& name : kHypoelliptic) out.emplace_back(name, cmd_identities(load(name)));
  secs = seconds_since(t0);
  return out;
}

Outcome criterion3(const std::vector<std::pair<std::string, AuditReport>>& reps, double secs) {
  Outcome o;
  for (const auto& [name, rep] : reps) {
    int dil = 0;
    for (const auto& e : rep.entries)
      if (e.check == "covariance.dilation_identity") {
        ++dil;
        o.require(e.pass, name + " dilation identity " + fmt_double(e.headline()));
      }
    o.require(dil == 3, name + " dilation identity not run for all three lambdas");
    require_entry(o, rep, "kernel.gamma0_homogeneity", name);
    require_entry(o, rep, "group.norm_homogeneity", name);
    require_entry(o, rep, "covariance.small_time", name);
    if (const AuditEntry* e = entry(rep, "kernel.gamma0_homogeneity"))
      o.require(e->get("points_used") >= 1000, name + " fewer than 1000 gamma0 points");
  }
  require_runtime(o, secs, 10.0);
  o.detail = "runtime " + fmt_double(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion4(const std::vector<std::pair<std::string, AuditReport>>& reps) {
  Outcome o;
  double worst = 0;
  for (const auto& [name, rep] : reps) {
    require_entry(o, rep, "invariance.left_translation", name);
    require_entry(o, rep, "invariance.L0_homogeneity", name);
    require_entry(o, rep, "group.axioms", name);
    for (const char* c : {"invariance.left_translation", "invariance.L0_homogeneity"})
      if (const AuditEntry* e = entry(rep, c)) worst = std::max(worst, e->headline());
  }
  o.detail = "max invariance rel error " + fmt_double(worst) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion5() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  AuditReport kol = cmd_kernel(load("kolmogorov-2d"));
  AuditReport heat = cmd_kernel(load("heat-Nd"));
  double secs = seconds_since(t0);
  require_all(o, kol, "kolmogorov-2d");
  require_all(o, heat, "heat-Nd");
  require_entry(o, heat, "kernel.offdiagonal_cancellation", "heat-Nd");
  if (const AuditEntry* h = entry(kol, "kernel.hilbert_negative_control"))
    o.require(h->get("rough_cauchy") == 0.0, "rough Hilbert truncation passed its certificate");
  require_runtime(o, secs, 120.0);
  std::string d = "runtime " + fmt_double(secs) + " s";
  if (const AuditEntry* e = entry(kol, "kernel.cancellation")) d += ", kolmogorov cauchy " + fmt_double(e->headline());
  o.detail = d + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion6() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  std::string d;
  for (const char* name : {"heat-1d", "kolmogorov-2d"}) {
    AuditReport rep = cmd_represent(load(name));
    require_all(o, rep, name);
    for (const char* c : {"represent.reconstruct_u", "represent.held_out_hessian"})
      require_entry(o, rep, c, name);
    if (const AuditEntry* e = entry(rep, "represent.calibration"))
      d += std::string(name) + " c_ij " + fmt_double(e->get("c_ij")) + " iqr " + fmt_double(e->get("iqr")) + ", ";
  }
  double secs = seconds_since(t0);
  require_runtime(o, secs, 300.0);
  o.detail = d + "runtime " + fmt_double(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion7() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load("kolmogorov-2d");
  cfg.family = 50;
  AuditReport rep = cmd_lp(cfg);
  double secs = seconds_since(t0);
  require_all(o, rep, "kolmogorov-2d");
  for (const char* c : {"lp.ratios", "lp.weak11", "lp.covering_patched"}) require_entry(o, rep, c, "kolmogorov-2d");
  require_runtime(o, secs, 600.0);
  std::string d = "runtime " + fmt_double(secs) + " s";
  if (const AuditEntry* e = entry(rep, "lp.ratios"))
    d += ", translation " + fmt_double(e->get("translation_rel_diff")) + ", drift " +
         fmt_double(e->get("refinement_drift"));
  o.detail = d + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion8() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  std::string d;
  for (const char* name : {"heat-1d", "kolmogorov-2d"}) {
    Config cfg = load(name);
    cfg.samples = 100000;
    AuditReport rep = cmd_simulate(cfg);
    o.require(!rep.entries.empty() && rep.entries.front().check == "sde.scalar_ou_gate" && rep.entries.front().pass,
              std::string(name) + " scalar OU gate did not pass first");
    require_entry(o, rep, "sde.density_crosscheck", name);
    require_entry(o, rep, "sde.chapman_kolmogorov", name);
    if (const AuditEntry* e = entry(rep, "sde.density_crosscheck")) d += std::string(name) + " TV " + fmt_double(e->get("tv")) + ", ";
    if (std::string(name) == "kolmogorov-2d") {
      require_entry(o, rep, "sde.variance_slope", name);
      if (const AuditEntry* e = entry(rep, "sde.variance_slope")) {
        o.require(e->get("expected") == 3.0, "expected slope is not 3");
        d += "variance slope " + fmt_double(e->headline()) + ", ";
      }
    }
  }
  double secs = seconds_since(t0);
  require_runtime(o, secs, 60.0);
  o.detail = d + "runtime " + fmt_double(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion9() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load("heat-1d");
  cfg.cover_half = 1.0;
  cfg.cover_t_lo = -1.0;
  cfg.cover_t_hi = 1.0;
  Covering cov;
  AuditReport rep = cmd_cover(cfg, &cov);
  double secs = seconds_since(t0);
  require_all(o, rep, "heat-1d");
  std::string d;
  if (const AuditEntry* e = entry(rep, "cover.region")) {
    o.require(e->get("coverage") == 1.0, "coverage below 100%");
    d += "coverage " + fmt_double(e->get("coverage")) + ", overlap " + fmt_double(e->get("overlap")) + ", centers " +
         fmt_double(e->get("centers")) + ", ";
  } else {
    o.require(false, "cover.region missing");
  }
  if (const AuditEntry* e = entry(rep, "geometry.ball_volume_slope")) d += "slope " + fmt_double(e->headline()) + ", ";
  if (const AuditEntry* e = entry(rep, "geometry.doubling")) d += "doubling c " + fmt_double(e->headline()) + ", ";
  require_runtime(o, secs, 120.0);
  o.detail = d + "runtime " + fmt_double(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int k, const Outcome& o) {
    std::printf("criterion %d: %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  report(1, guarded(criterion1));
  report(2, guarded(criterion2));
  double id_secs = 0;
  std::vector<std::pair<std::string, AuditReport>> ids;
  try {
    ids = identity_reports(id_secs);
  } catch (const std::exception& e) {
    report(3, {false, std::string("exception: ") + e.what()});
    report(4, {false, std::string("exception: ") + e.what()});
  }
  if (!ids.empty()) {
    report(3, guarded([&] { return criterion3(ids, id_secs); }));
    report(4, guarded([&] { return criterion4(ids); }));
  }
  report(5, guarded(criterion5));
  report(6, guarded(criterion6));
  report(7, guarded(criterion7));
  report(8, guarded(criterion8));
  report(9, guarded(criterion9));
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
