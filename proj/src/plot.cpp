#include "mrq/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mrq/errors.hpp"
#include "mrq/stats.hpp"

namespace mrq {

MetricsSet read_eval_curves(const std::vector<std::filesystem::path>& files) {
  MetricsSet out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw ConfigError("cannot read metrics file " + f.string());
    std::string env = f.stem().string();
    const auto manifest = f.parent_path() / "manifest.json";
    if (std::filesystem::exists(manifest)) {
      try {
        std::ifstream m(manifest);
        const auto j = nlohmann::json::parse(m);
        env = j.at("env").at("name").get<std::string>();
      } catch (const nlohmann::json::exception&) {
      }
    }
    Curve c;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto& ev = j.at("eval_return");
        if (ev.is_null()) continue;
        c.steps.push_back(j.at("step").get<long>());
        c.values.push_back(ev.get<double>());
      } catch (const nlohmann::json::exception&) {
        ++out.malformed_lines;
      }
    }
    out.by_env[env].push_back(std::move(c));
  }
  return out;
}

Band aggregate(const std::vector<Curve>& curves, int resamples, std::uint64_t seed) {
  Band b;
  if (curves.empty()) return b;
  std::set<long> shared(curves[0].steps.begin(), curves[0].steps.end());
  for (size_t i = 1; i < curves.size(); ++i) {
    std::set<long> s(curves[i].steps.begin(), curves[i].steps.end()), keep;
    std::set_intersection(shared.begin(), shared.end(), s.begin(), s.end(), std::inserter(keep, keep.end()));
    shared = std::move(keep);
  }
  for (long step : shared) {
    std::vector<double> v;
    for (const auto& c : curves) {
      const auto it = std::find(c.steps.begin(), c.steps.end(), step);
      v.push_back(c.values[static_cast<size_t>(it - c.steps.begin())]);
    }
    const Interval ci = bootstrap_ci(v, resamples, 0.95, seed);
    b.steps.push_back(step);
    b.mean.push_back(ci.mean);
    b.lo.push_back(ci.lo);
    b.hi.push_back(ci.hi);
  }
  return b;
}

std::string render_svg(const std::string& title, const Band& band) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << title << "</text>\n";
  if (band.steps.empty()) {
    s << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no evaluations</text>\n</svg>\n";
    return s.str();
  }
  const double x0 = static_cast<double>(band.steps.front()), x1 = static_cast<double>(band.steps.back());
  double y0 = *std::min_element(band.lo.begin(), band.lo.end());
  double y1 = *std::max_element(band.hi.begin(), band.hi.end());
  if (y1 - y0 < 1e-9) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) { return x1 > x0 ? L + (x - x0) / (x1 - x0) * (W - L - R) : L + (W - L - R) / 2; };
  auto py = [&](double y) { return T + (y1 - y) / (y1 - y0) * (H - T - B); };

  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
      << "</text>\n";
    s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << static_cast<long>(xv) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\" font-size=\"12\">eval return</text>\n";

  s << "<polygon fill=\"#4c72b0\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (size_t i = 0; i < band.steps.size(); ++i) s << px(static_cast<double>(band.steps[i])) << "," << py(band.hi[i]) << " ";
  for (size_t i = band.steps.size(); i-- > 0;) s << px(static_cast<double>(band.steps[i])) << "," << py(band.lo[i]) << " ";
  s << "\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < band.steps.size(); ++i) s << px(static_cast<double>(band.steps[i])) << "," << py(band.mean[i]) << " ";
  s << "\"/>\n</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> plot_files(const MetricsSet& set, const std::filesystem::path& out) {
  std::vector<std::filesystem::path> written;
  const bool single_file = out.extension() == ".svg" && set.by_env.size() == 1;
  if (!single_file) std::filesystem::create_directories(out);
  for (const auto& [env, curves] : set.by_env) {
    const auto path = single_file ? out : out / (env + ".svg");
    if (single_file && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << render_svg(env + " (" + std::to_string(curves.size()) + " seeds)", aggregate(curves));
    written.push_back(path);
  }
  return written;
}

}  // namespace mrq
