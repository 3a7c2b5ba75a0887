#include <array>
#include <string_view>

#include "spe/harness.hpp"

namespace spe {

namespace {

// Published within-project results for the 16 JIRA projects. Columns:
// FastText-SVM (rho, r_s, MAE), GPT2SP (rho, r_s, MAE), regression
// (rho, r_s, MAE), svm-comparative (rho, r_s), comparative-noval (rho, r_s),
// comparative-val (rho, r_s). Rendering only; never used in computation.
struct Row {
  std::string_view project;
  std::array<double, 15> v;
};

constexpr Row kRows[] = {
    {"appceleratorstudio", {0.3019, 0.2812, 1.4443, 0.1665, 0.1489, 1.1288, 0.3254, 0.3037, 3.5821, 0.2904, 0.2786, 0.3330, 0.3222, 0.2958, 0.2866}},
    {"aptanastudio", {0.1808, 0.1669, 3.4687, -0.0442, 0.0050, 2.2506, 0.3419, 0.2830, 5.8345, 0.2497, 0.1680, 0.3452, 0.2682, 0.3027, 0.2400}},
    {"bamboo", {0.1352, 0.1160, 0.8425, 0.0401, 0.1449, 0.6118, 0.1768, 0.1753, 0.8148, 0.2516, 0.2114, 0.1860, 0.1761, 0.0876, 0.0953}},
    {"clover", {0.3223, 0.2026, 3.6959, 0.1477, 0.2668, 2.2477, 0.4403, 0.4166, 3.8337, 0.4059, 0.3834, 0.4190, 0.4483, 0.4190, 0.4006}},
    {"datamanagement", {0.3640, 0.4354, 5.8862, 0.5217, 0.3410, 3.8146, 0.3775, 0.3909, 7.0462, 0.3389, 0.3974, 0.3271, 0.3794, 0.3021, 0.3864}},
    {"duracloud", {0.3252, 0.3089, 0.7085, 0.0459, 0.2669, 0.5697, 0.3758, 0.4221, 0.8064, 0.3593, 0.3792, 0.3858, 0.4006, 0.3829, 0.3939}},
    {"jirasoftware", {0.2576, 0.1599, 1.7541, 0.0433, 0.1213, 1.3050, 0.5324, 0.4987, 2.3916, 0.4522, 0.4463, 0.4414, 0.4386, 0.4915, 0.4442}},
    {"mesos", {0.3182, 0.3141, 1.1013, 0.2651, 0.3227, 0.8894, 0.3960, 0.3916, 1.5414, 0.4156, 0.4218, 0.4359, 0.4402, 0.4053, 0.4271}},
    {"moodle", {0.1893, 0.1712, 7.2921, 0.2799, 0.4291, 5.3546, 0.3499, 0.3552, 5.9245, 0.2794, 0.3169, 0.2929, 0.3276, 0.3301, 0.3574}},
    {"mule", {0.2266, 0.2536, 2.4483, 0.1593, 0.1785, 1.7313, 0.2342, 0.2459, 3.3713, 0.2209, 0.2392, 0.3188, 0.3235, 0.2306, 0.2498}},
    {"mulestudio", {0.2076, 0.1856, 3.6092, -0.1373, -0.1150, 1.5632, 0.1096, 0.0612, 5.6180, 0.1616, 0.1654, 0.2265, 0.2148, 0.2605, 0.2413}},
    {"springxd", {0.3920, 0.4231, 1.6833, 0.2146, 0.2261, 1.2182, 0.3982, 0.3911, 2.0790, 0.3888, 0.3867, 0.4066, 0.4041, 0.3984, 0.4155}},
    {"talenddataquality", {0.2370, 0.2281, 3.3422, 0.3504, 0.4097, 1.7789, 0.2892, 0.2985, 2.3418, 0.3015, 0.2949, 0.2983, 0.2973, 0.2363, 0.2393}},
    {"talendesb", {0.4419, 0.4641, 0.8134, 0.4820, 0.4161, 0.4507, 0.3453, 0.3550, 0.9979, 0.4007, 0.4180, 0.4189, 0.4528, 0.4165, 0.4567}},
    {"titanium", {0.1086, 0.1059, 2.2120, 0.1297, 0.1582, 2.0910, 0.1861, 0.2264, 3.8560, 0.1828, 0.2519, 0.2098, 0.2439, 0.1945, 0.1881}},
    {"usergrid", {0.2265, 0.2891, 1.1840, 0.3049, 0.3851, 0.4911, 0.2016, 0.1981, 1.6888, 0.2895, 0.2764, 0.2945, 0.3075, 0.3020, 0.3059}},
    {"Average", {0.2647, 0.2566, 2.5929, 0.1856, 0.2316, 1.7185, 0.3175, 0.3133, 3.2330, 0.3118, 0.3147, 0.3337, 0.3403, 0.3160, 0.3205}},};

const Row* find_row(std::string_view project) {
  for (const auto& row : kRows) {
    if (row.project == project) return &row;
  }
  return nullptr;
}

std::optional<PublishedResult> from_row(const Row* row, ModelKind model) {
  if (!row) return std::nullopt;
  const auto& v = row->v;
  switch (model) {
    case ModelKind::regression: return PublishedResult{v[6], v[7], v[8]};
    case ModelKind::svm_comparative: return PublishedResult{v[9], v[10], std::nullopt};
    case ModelKind::comparative_noval: return PublishedResult{v[11], v[12], std::nullopt};
    case ModelKind::comparative_val: return PublishedResult{v[13], v[14], std::nullopt};
  }
  return std::nullopt;
}

}  // namespace

std::optional<PublishedResult> published_result(std::string_view project, ModelKind model) {
  if (project == "Average") return std::nullopt;
  return from_row(find_row(project), model);
}

std::optional<PublishedResult> published_average(ModelKind model) { return from_row(find_row("Average"), model); }

std::optional<PublishedResult> published_baseline(std::string_view project, std::string_view baseline) {
  const Row* row = find_row(project);
  if (!row) return std::nullopt;
  if (baseline == "FastText-SVM") return PublishedResult{row->v[0], row->v[1], row->v[2]};
  if (baseline == "GPT2SP") return PublishedResult{row->v[3], row->v[4], row->v[5]};
  return std::nullopt;
}

}  // namespace spe
