#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "mrsession/calculus/encodings.hpp"
#include "mrsession/calculus/eval.hpp"
#include "mrsession/calculus/generate.hpp"
#include "mrsession/calculus/metatheory.hpp"
#include "mrsession/calculus/sexpr.hpp"
#include "mrsession/calculus/typecheck.hpp"
#include "mrsession/df_analysis.hpp"
#include "mrsession/protocols.hpp"
#include "mrsession/trace.hpp"

using namespace mrsession;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kRejected = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  bool json_out = false;
  std::string file;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t max_steps = 100000;
  std::string trace;
  int nrole = 0;  // 0: take it from the input
  bool unsafe = false;
  std::string title = "tapl";
  std::int64_t price = 100;
  std::int64_t contribution = 60;
  std::int64_t budget = 50;
  std::string script;
  std::size_t n = 3;
  std::string collection;
  std::size_t seeds = 20;
};

// One result line: JSON with --json, otherwise `text`.
void report(const Options& o, const json& j, const std::string& text) {
  if (o.json_out) {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << text << '\n';
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void check_nrole(const Options& o, int actual) {
  if (o.nrole != 0 && o.nrole != actual) {
    throw UsageError("--nrole " + std::to_string(o.nrole) + " does not match the input's nrole " +
                     std::to_string(actual));
  }
}

void save_trace(const Options& o, const std::vector<TraceRecord>& records) {
  if (o.trace.empty()) return;
  std::ofstream out(o.trace);
  if (!out) throw UsageError("cannot write " + o.trace);
  write_trace(out, records);
}

proto::RunOptions run_options() { return proto::RunOptions{}; }

// ---------------------------------------------------------------------------

int cmd_typecheck(const Options& o) {
  calc::Pool p = calc::parse_pool(slurp(o.file));
  check_nrole(o, p.universe.nrole());
  try {
    calc::Viewtype t = calc::typecheck_pool(p, o.unsafe);
    report(o, {{"ok", true}, {"type", calc::format_type(t)}}, "ok: " + calc::format_type(t));
    return kOk;
  } catch (const Error& e) {
    if (e.code() != Errc::TypeError) throw;
    report(o, {{"ok", false}, {"error", e.what()}}, std::string("type error: ") + e.what());
    return kRejected;
  }
}

int run_file(const Options& o) {
  calc::Pool p = calc::parse_pool(slurp(o.file));
  check_nrole(o, p.universe.nrole());
  calc::typecheck_pool(p, o.unsafe);
  calc::RunResult r = calc::run_pool(p, o.seed, o.max_steps);
  save_trace(o, r.trace);
  json j = {{"status", calc::status_name(r.status)}, {"steps", r.steps}};
  std::string text = std::string(calc::status_name(r.status)) + " after " + std::to_string(r.steps) + " steps";
  if (r.status == calc::RunStatus::Final) {
    auto main = r.final_pool.threads.find(0);
    if (main != r.final_pool.threads.end()) {
      j["value"] = calc::format_expr(main->second);
      text += ": " + calc::format_expr(main->second);
    }
  }
  if (r.deadlock_snapshot) {
    j["snapshot"] = format_collection(*r.deadlock_snapshot);
    j["df_reducible"] = is_df_reducible(*r.deadlock_snapshot);
    text += "\nsnapshot " + format_collection(*r.deadlock_snapshot) +
            (is_df_reducible(*r.deadlock_snapshot) ? " (DF-reducible)" : " (not DF-reducible)");
  }
  report(o, j, text);
  return r.status == calc::RunStatus::Deadlock ? kRejected : kOk;
}

int run_two_buyer(const Options& o) {
  check_nrole(o, 3);
  auto out = proto::run_two_buyer(o.title, o.price, o.contribution, o.budget, run_options());
  save_trace(o, out.events);
  bool ok = out.branch == proto::TwoBuyerOutcome::Branch::Success;
  json msgs = json::array();
  std::string text = ok ? "success: " + *out.receipt : "failure: B2 declined";
  for (const auto& m : out.messages) {
    msgs.push_back({{"from", m.from}, {"to", m.to}, {"payload", json::parse(m.payload)}});
    text += "\n  " + std::to_string(m.from) + " -> " + std::to_string(m.to) + ": " + m.payload;
  }
  json j = {{"branch", ok ? "success" : "failure"}, {"messages", msgs}, {"live_endpoints", out.live_endpoints_after}};
  if (out.receipt) j["receipt"] = *out.receipt;
  report(o, j, text);
  return kOk;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s + "]";
}

int run_queue(const Options& o) {
  check_nrole(o, 3);
  if (o.script.empty()) throw UsageError("run queue needs --script FILE");
  auto script = proto::parse_queue_script(slurp(o.script));
  auto out = proto::run_queue_session(script, run_options());
  save_trace(o, out.events);
  std::string deq;
  for (auto v : out.dequeued) deq += (deq.empty() ? "" : ",") + std::to_string(v);
  report(o,
         {{"sizes_s0", out.sizes_s0}, {"sizes_c1", out.sizes_c1}, {"sizes_c2", out.sizes_c2},
          {"dequeued", out.dequeued}, {"live_endpoints", out.live_endpoints_after}},
         "sizes S0 " + join_sizes(out.sizes_s0) + " C1 " + join_sizes(out.sizes_c1) + " C2 " +
             join_sizes(out.sizes_c2) + "\ndequeued [" + deq + "]");
  return kOk;
}

int run_stream(const Options& o, bool colist) {
  check_nrole(o, 2);
  auto out = colist ? proto::run_colist_session(o.n, run_options()) : proto::run_list_session(o.n, run_options());
  save_trace(o, out.events);
  std::string vals;
  for (auto v : out.values) vals += (vals.empty() ? "" : ",") + std::to_string(v);
  report(o, {{"values", out.values}, {"live_endpoints", out.live_endpoints_after}}, "[" + vals + "]");
  return kOk;
}

int run_deadlock_demo(const Options& o) {
  check_nrole(o, 2);
  if (!o.unsafe) throw UsageError("deadlock-demo needs --unsafe");
  auto d = proto::demo_chan2_create_deadlock(true, run_options());
  save_trace(o, d.events);
  json j = {{"deadlocked", d.deadlocked}, {"message", d.message}};
  std::string text = d.deadlocked ? "deadlock detected: " + d.message : "no deadlock this time";
  if (d.snapshot) {
    j["snapshot"] = format_collection(*d.snapshot);
    j["df_reducible"] = *d.snapshot_df_reducible;
    text += "\nsnapshot " + format_collection(*d.snapshot) +
            (*d.snapshot_df_reducible ? " (DF-reducible)" : " (not DF-reducible)");
  }
  report(o, j, text);
  return kOk;
}

int cmd_run(const Options& o) {
  if (o.target == "two-buyer") return run_two_buyer(o);
  if (o.target == "queue") return run_queue(o);
  if (o.target == "list") return run_stream(o, false);
  if (o.target == "colist") return run_stream(o, true);
  if (o.target == "deadlock-demo") return run_deadlock_demo(o);
  Options f = o;
  f.file = o.target;
  return run_file(f);
}

int cmd_analyze(const Options& o) {
  if (!o.collection.empty()) {
    ChannelSetCollection m = parse_collection(o.collection);
    if (!is_regular(m)) {
      report(o, {{"regular", false}}, "irregular collection");
      return kRejected;
    }
    bool df = is_df_reducible(m);
    report(o, {{"regular", true}, {"df_reducible", df}}, df ? "DF-reducible" : "not DF-reducible");
    return df ? kOk : kRejected;
  }
  if (o.file.empty()) throw UsageError("analyze needs a trace file or --collection");
  std::istringstream in(slurp(o.file));
  auto records = read_trace(in);
  std::vector<const TraceRecord*> with;
  for (const auto& r : records) {
    if (r.rho_ch) with.push_back(&r);
  }
  auto rep = check_trace_preservation(trace_snapshots(records));
  if (rep.clean()) {
    report(o, {{"records", records.size()}, {"snapshots", rep.checked}, {"df_preserved", true}},
           "all " + std::to_string(rep.checked) + " snapshots DF-reducible");
    return kOk;
  }
  const TraceRecord& bad = *with.at(*rep.first_violation);
  report(o,
         {{"records", records.size()}, {"snapshots", rep.checked}, {"df_preserved", false},
          {"step", bad.step}, {"rule", bad.rule}, {"snapshot", format_collection(*bad.rho_ch)}, {"reason", rep.reason}},
         "step " + std::to_string(bad.step) + " (" + bad.rule + "): " + format_collection(*bad.rho_ch) + " " +
             rep.reason);
  return kRejected;
}

int cmd_fuzz(const Options& o) {
  auto corpus = calc::builtin_pools();
  std::mt19937_64 rng(o.seed);
  int failures = 0;
  std::size_t steps = 0;
  for (std::size_t k = 0; k < o.seeds; ++k) {
    // alternate between the built-in corpus and freshly generated pools
    std::string name;
    calc::Pool p;
    if (k % 2 == 0) {
      const auto& entry = corpus[(k / 2) % corpus.size()];
      name = entry.first;
      p = entry.second;
    } else {
      calc::GenOptions g;
      g.nrole = o.nrole ? o.nrole : 2 + static_cast<int>(k % 3);
      g.protocol_depth = 2 + static_cast<int>(k % 4);
      name = "generated";
      p = calc::random_pool(rng, g);
    }
    std::uint64_t seed = rng();
    auto r = calc::explore_schedule(p, seed, o.max_steps);
    steps += r.steps;
    if (!r.clean()) {
      ++failures;
      report(o,
             {{"run", k}, {"pool", name}, {"seed", seed}, {"subject_reduction", r.subject_reduction},
              {"progress", r.progress}, {"df", r.df}, {"failure", r.first_failure}},
             "run " + std::to_string(k) + " (" + name + ", seed " + std::to_string(seed) + "): " + r.first_failure);
    }
  }
  report(o, {{"runs", o.seeds}, {"steps", steps}, {"failures", failures}},
         std::to_string(o.seeds) + " runs, " + std::to_string(steps) + " steps, " + std::to_string(failures) +
             " failures");
  return failures ? kRejected : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multirole session toolkit"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("--json", o.json_out, "Print results as JSON lines");

  auto* tc = app.add_subcommand("typecheck", "Typecheck a pool file");
  tc->add_option("file", o.file)->required();
  tc->add_option("--nrole", o.nrole);
  tc->add_flag("--unsafe", o.unsafe, "Admit chan2_create");

  auto* run = app.add_subcommand("run", "Run a pool file or a built-in protocol");
  run->add_option("target", o.target, "FILE | two-buyer | queue | list | colist | deadlock-demo")->required();
  run->add_option("--seed", o.seed);
  run->add_option("--max-steps", o.max_steps);
  run->add_option("--trace", o.trace, "Write the JSON-lines trace here");
  run->add_option("--nrole", o.nrole);
  run->add_flag("--unsafe", o.unsafe);
  run->add_option("--title", o.title);
  run->add_option("--price", o.price);
  run->add_option("--contribution", o.contribution);
  run->add_option("--budget", o.budget);
  run->add_option("--script", o.script, "Queue script file");
  run->add_option("--n", o.n, "Number of list elements");

  auto* an = app.add_subcommand("analyze", "Check DF-reducibility of a trace or a collection");
  an->add_option("file", o.file, "JSON-lines trace");
  an->add_option("--collection", o.collection, "Literal such as [{1+,2-},{2+,1-}]");

  auto* fz = app.add_subcommand("fuzz", "Random schedules with subject reduction, progress and DF checks");
  fz->add_option("--seeds", o.seeds, "Number of runs");
  fz->add_option("--seed", o.seed);
  fz->add_option("--max-steps", o.max_steps);
  fz->add_option("--nrole", o.nrole);

  for (auto* sub : {tc, run, an, fz}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*tc) return cmd_typecheck(o);
    if (*run) return cmd_run(o);
    if (*an) return cmd_analyze(o);
    return cmd_fuzz(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const Error& e) {
    report(o, {{"error", errc_name(e.code())}, {"message", e.what()}},
           e.what());
    return kRejected;
  }
}
