#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "csv.hpp"
#include "spe/error.hpp"
#include "spe/harness.hpp"

namespace spe {

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  // Avoid "-0.0000".
  if (std::string_view(buf) == "-0.0000") return "0.0000";
  return buf;
}

std::string correlation_cell(const std::optional<double>& v) { return v ? fixed4(*v) : "undefined"; }

std::string mae_cell(const std::optional<double>& v) { return v ? fixed4(*v) : ""; }

std::string display_name(ModelKind model, std::size_t k) {
  if (model == ModelKind::regression) return "regression";
  return std::string(to_string(model)) + " (k=" + std::to_string(k) + ")";
}

// Published numbers were reported for k = 1 comparative runs and for regression.
std::optional<PublishedResult> reference_for(const std::string& project, ModelKind model, std::size_t k) {
  if (is_comparative(model) && k != 1) return std::nullopt;
  return project == "Average" ? published_average(model) : published_result(project, model);
}

std::string render_csv(const ExperimentReport& report, bool with_reference) {
  std::vector<std::string> header{"project", "model", "k", "n_test", "repeats", "pearson", "spearman", "mae",
                                  "undefined_pearson", "undefined_spearman"};
  if (with_reference) {
    header.insert(header.end(), {"published_pearson", "published_spearman", "published_mae"});
  }
  std::string out = csv::join(header) + "\n";

  auto reference_cells = [&](std::vector<std::string>& row, const std::string& project, ModelKind m, std::size_t k) {
    if (!with_reference) return;
    const auto ref = reference_for(project, m, k);
    row.push_back(ref ? fixed4(ref->pearson) : "");
    row.push_back(ref ? fixed4(ref->spearman) : "");
    row.push_back(ref && ref->mae ? fixed4(*ref->mae) : "");
  };

  for (const auto& e : report.entries) {
    std::vector<std::string> row{e.project,
                                 std::string(to_string(e.model)),
                                 std::to_string(e.k),
                                 std::to_string(e.n_test),
                                 std::to_string(e.repeats.size()),
                                 correlation_cell(e.pearson),
                                 correlation_cell(e.spearman),
                                 mae_cell(e.mae),
                                 std::to_string(e.undefined_pearson),
                                 std::to_string(e.undefined_spearman)};
    reference_cells(row, e.project, e.model, e.k);
    out += csv::join(row) + "\n";
  }
  for (const auto& a : report.averages) {
    std::vector<std::string> row{"Average",
                                 std::string(to_string(a.model)),
                                 std::to_string(a.k),
                                 "",
                                 std::to_string(a.projects),
                                 correlation_cell(a.pearson),
                                 correlation_cell(a.spearman),
                                 mae_cell(a.mae),
                                 "",
                                 ""};
    reference_cells(row, "Average", a.model, a.k);
    out += csv::join(row) + "\n";
  }
  return out;
}

struct Group {
  ModelKind model;
  std::size_t k;
};

std::string render_markdown(const ExperimentReport& report, bool with_reference) {
  std::vector<Group> groups;
  std::vector<std::string> projects;
  for (const auto& e : report.entries) {
    bool seen = false;
    for (const auto& g : groups) seen = seen || (g.model == e.model && g.k == e.k);
    if (!seen) groups.push_back({e.model, e.k});
    if (std::find(projects.begin(), projects.end(), e.project) == projects.end()) projects.push_back(e.project);
  }

  std::string out = "# Within-project results\n\n";
  std::string header = "| Project |";
  std::string rule = "|---|";
  for (const auto& g : groups) {
    const std::string name = display_name(g.model, g.k);
    header += " " + name + " ρ | " + name + " r_s |";
    rule += "---:|---:|";
    if (g.model == ModelKind::regression) {
      header += " " + name + " MAE |";
      rule += "---:|";
    }
    if (with_reference && reference_for("Average", g.model, g.k)) {
      header += " published ρ | published r_s |";
      rule += "---:|---:|";
      if (g.model == ModelKind::regression) {
        header += " published MAE |";
        rule += "---:|";
      }
    }
  }
  out += header + "\n" + rule + "\n";

  auto cells = [&](const std::string& project, const Group& g, const std::optional<double>& p,
                   const std::optional<double>& s, const std::optional<double>& m, bool present) {
    std::string row;
    row += " " + (present ? correlation_cell(p) : std::string("-")) + " |";
    row += " " + (present ? correlation_cell(s) : std::string("-")) + " |";
    if (g.model == ModelKind::regression) row += " " + (present ? mae_cell(m) : std::string("-")) + " |";
    if (with_reference && reference_for("Average", g.model, g.k)) {
      const auto ref = reference_for(project, g.model, g.k);
      row += " " + (ref ? fixed4(ref->pearson) : std::string("-")) + " |";
      row += " " + (ref ? fixed4(ref->spearman) : std::string("-")) + " |";
      if (g.model == ModelKind::regression) row += " " + (ref && ref->mae ? fixed4(*ref->mae) : std::string("-")) + " |";
    }
    return row;
  };

  for (const auto& project : projects) {
    std::string row = "| " + project + " |";
    for (const auto& g : groups) {
      const ReportEntry* entry = nullptr;
      for (const auto& e : report.entries) {
        if (e.project == project && e.model == g.model && e.k == g.k) entry = &e;
      }
      row += entry ? cells(project, g, entry->pearson, entry->spearman, entry->mae, true)
                   : cells(project, g, {}, {}, {}, false);
    }
    out += row + "\n";
  }
  std::string avg_row = "| **Average** |";
  for (const auto& g : groups) {
    const AverageRow* avg = nullptr;
    for (const auto& a : report.averages) {
      if (a.model == g.model && a.k == g.k) avg = &a;
    }
    avg_row += avg ? cells("Average", g, avg->pearson, avg->spearman, avg->mae, true)
                   : cells("Average", g, {}, {}, {}, false);
  }
  out += avg_row + "\n\n";

  std::size_t undefined = 0;
  for (const auto& e : report.entries) undefined += e.undefined_pearson + e.undefined_spearman;

  out += "Notes:\n\n";
  out += "- r_s uses average ranks for ties (Pearson correlation of fractional ranks).\n";
  out += "- MAE is computed on raw (unrounded) predictions and reported for regression only; "
         "comparative scores are unitless.\n";
  out += "- Simulated pairs reject partners with a tied story point; lost pairs are counted as shortfall.\n";
  out += "- Means skip repeats whose correlation is undefined (" + std::to_string(undefined) +
         " undefined value(s) in this report).\n";

  for (const auto& a : report.averages) {
    if (a.model != ModelKind::comparative_noval || a.k != 1) continue;
    out += "\n## Replication check\n\n";
    if (!a.spearman) {
      out += "Average r_s of comparative-noval (k=1) is undefined.\n";
      break;
    }
    const double diff = *a.spearman - kPublishedComparativeSpearman;
    const bool within = std::abs(diff) <= kReplicationBand + 1e-12;
    out += "Average r_s of comparative-noval (k=1) over " + std::to_string(a.projects) + " project(s): " +
           fixed4(*a.spearman) + " vs published " + fixed4(kPublishedComparativeSpearman) + " (band ±" +
           fixed4(kReplicationBand) + "): " + (within ? "within band" : "outside band") + ".\n";
    out += "Exact replication needs the original sentence-embedding files and all 16 projects; "
           "this check is informational.\n";
    break;
  }

  if (!report.errors.empty()) {
    out += "\n## Errors\n\n";
    for (const auto& err : report.errors) {
      out += "- " + err.project + ": " + err.code + ": " + err.message + "\n";
    }
  }
  return out;
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "delimited-table" || text == "csv") return ReportFormat::delimited_table;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  throw ValidationError("unknown report format '" + std::string(text) + "'");
}

std::string render_report(const ExperimentReport& report, ReportFormat format, bool with_reference) {
  if (report.empty()) throw ValidationError("report has no entries");
  return format == ReportFormat::markdown ? render_markdown(report, with_reference)
                                          : render_csv(report, with_reference);
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path,
                 bool with_reference) {
  const auto text = render_report(report, format, with_reference);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string render_sweep(const SweepCurve& curve) {
  std::string out = "model,k,mean_spearman,projects\n";
  for (const auto& [model, points] : curve) {
    for (const auto& p : points) {
      out += std::string(to_string(model)) + "," + std::to_string(p.k) + "," +
             (p.spearman ? fixed4(*p.spearman) : "undefined") + "," + std::to_string(p.projects) + "\n";
    }
  }
  return out;
}

}  // namespace spe
