// reproguard: batch front end for the guarded octree and latent codecs.
//
// Exit codes: 0 exact / success, 2 decode mismatch, 3 malformed stream,
// 4 configuration rejected, 5 I/O error, 6 bad input or parse error,
// 7 internal error. Command-line usage errors use CLI11's codes.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reproguard/reproguard.hpp"

using namespace reproguard;

namespace {

enum Exit : int { kExact = 0, kMismatch = 2, kMalformed = 3, kConfig = 4, kIo = 5, kInput = 6, kInternal = 7 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::MalformedStream:
    case ErrorKind::TruncatedStream:
    case ErrorKind::BadMagic:
    case ErrorKind::UnsupportedVersion:
    case ErrorKind::LengthOverflow:
    case ErrorKind::TrailingBytes: return kMalformed;
    case ErrorKind::ConfigRejected: return kConfig;
    case ErrorKind::Io: return kIo;
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidIndex:
    case ErrorKind::Domain:
    case ErrorKind::Parse: return kInput;
    case ErrorKind::Serialization:
    case ErrorKind::Internal: return kInternal;
  }
  return kInternal;
}

struct PerturbArgs {
  double e = 0.0;
  std::string dist = "uniform";
  std::uint64_t seed = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--perturb-e", e, "Maximum injected error e on the decoder side")->check(CLI::NonNegativeNumber);
    cmd->add_option("--perturb-dist", dist, "none, uniform or adversarial")
        ->check(CLI::IsMember({"none", "uniform", "adversarial"}));
    cmd->add_option("--perturb-seed", seed, "Seed of the perturbation stream");
  }
  Perturbation get() const { return Perturbation{e, parse_perturb_dist(dist), seed, 0}; }
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

double overhead_pct(const GuardedStream& s) {
  return s.main.empty() ? 0.0 : 100.0 * static_cast<double>(guard_bytes(s)) / static_cast<double>(s.main.size());
}

// Decodes and compares; prints the status line and returns the exit code.
template <class Decode, class Expected>
int verify(Decode&& decode, const Expected& expected) {
  try {
    if (decode() == expected) {
      std::cout << "EXACT\n";
      return kExact;
    }
    std::cout << "DECODE MISMATCH\n";
    return kMismatch;
  } catch (const Error& e) {
    std::cout << "DECODE FAILURE: " << e.what() << "\n";
    return e.kind() == ErrorKind::Internal ? kInternal : kMalformed;
  }
}

// ---- encode-pc / decode-pc ------------------------------------------------

struct EncodePcArgs {
  std::string input, output, mode = "center";
  double epsilon = 1e-6;
  std::uint32_t k = 250;
  std::optional<int> depth;
  bool no_protect = false;
  PerturbArgs perturb;
};

int run_encode_pc(const EncodePcArgs& a) {
  const VoxelCloud cloud = read_ply(a.input, a.depth);
  const GuardConfig cfg = octree_guard_config(a.k, a.epsilon, parse_guard_mode(a.mode));
  OctreeOptions opt;
  opt.protect = !a.no_protect;
  const GuardedStream s = encode_octree(cloud, cfg, opt);
  const auto bytes = write_container(s);
  write_file(a.output, bytes);
  std::printf("points %zu depth %d main %zu B safeguard %zu B\n", cloud.size(), cloud.bit_depth(), s.main.size(),
              guard_bytes(s));
  std::printf("bpp %.4f overhead %.4f%%\n", 8.0 * static_cast<double>(s.main.size()) / static_cast<double>(cloud.size()),
              overhead_pct(s));
  const GuardedStream back = read_container(bytes);
  return verify([&] { return decode_octree(back, a.perturb.get()); }, cloud);
}

struct DecodePcArgs {
  std::string input, output, reference;
  PerturbArgs perturb;
};

int run_decode_pc(const DecodePcArgs& a) {
  const GuardedStream s = read_container(read_file(a.input));
  const VoxelCloud cloud = decode_octree(s, a.perturb.get());
  if (!a.output.empty()) write_ply(a.output, cloud);
  std::printf("decoded %zu voxels at depth %d\n", cloud.size(), cloud.bit_depth());
  if (a.reference.empty()) return kExact;
  const VoxelCloud ref = read_ply(a.reference, cloud.bit_depth());
  return verify([&] { return cloud; }, ref);
}

// ---- demo-image / decode-image --------------------------------------------

struct ImageArgs {
  std::uint32_t height = 64, width = 64, channels = 8;
  std::uint64_t seed = 1;
  double epsilon = 1e-4;
  std::string mode = "center", output, input;
  bool no_protect = false;
  PerturbArgs perturb;
};

int run_demo_image(const ImageArgs& a) {
  const LatentGrid lat = synth_latents(a.height, a.width, a.channels, a.seed);
  const GuardConfig cfg = hyperprior_guard_config(a.epsilon, parse_guard_mode(a.mode));
  HyperpriorOptions opt;
  opt.protect = !a.no_protect;
  const GuardedStream s = encode_hyperprior(lat, cfg, opt);
  const auto bytes = write_container(s);
  if (!a.output.empty()) write_file(a.output, bytes);
  std::printf("latents %ux%ux%u main %zu B safeguard %zu B overhead %.4f%% flags %u p0_q16 %u\n", a.height, a.width,
              a.channels, s.main.size(), guard_bytes(s), overhead_pct(s), s.flag_count, s.p0_q16);
  const GuardedStream back = read_container(bytes);
  return verify([&] { return decode_hyperprior(back, a.perturb.get()).y_hat; }, quantize_latents(lat.y));
}

int run_decode_image(const ImageArgs& a, bool have_seed) {
  const GuardedStream s = read_container(read_file(a.input));
  const DecodedLatents d = decode_hyperprior(s, a.perturb.get());
  if (!a.output.empty()) {
    std::ofstream out(a.output);
    if (!out) fail(ErrorKind::Io, "cannot write " + a.output);
    for (int v : d.y_hat) out << v << '\n';
  }
  std::printf("decoded %ux%ux%u latents\n", d.height, d.width, d.channels);
  if (!have_seed) return kExact;
  const LatentGrid lat = synth_latents(d.height, d.width, d.channels, a.seed);
  return verify([&] { return d.y_hat; }, quantize_latents(lat.y));
}

// ---- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::string payload = "pc", kind = "dense", out, svg;
  std::vector<double> epsilons{1e-5, 5e-6, 1e-6, 5e-7, 1e-7};
  std::vector<std::uint32_t> ks{250, 125};
  std::vector<std::uint64_t> seeds{1};
  int depth = 10;
  std::size_t points = 100000;
  std::uint32_t height = 64, width = 64, channels = 8;
};

struct SweepRow {
  std::string payload, kind;
  std::uint64_t n = 0;
  std::optional<double> q;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::size_t main_bytes = 0, guard = 0;
  double overhead = 0.0, p0 = 0.0;
  bool exact = false;
  std::string warning;  // set when the configuration was rejected
};

constexpr const char* kCsvHeader = "payload,kind,n,q,epsilon,seed,main_bytes,guard_bytes,overhead_pct,p0,exact";

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_line(const SweepRow& r) {
  std::ostringstream o;
  if (!r.warning.empty()) {
    o << "# warning: skipped " << r.payload << " q=" << (r.q ? fmt_g(*r.q) : "") << " epsilon=" << fmt_g(r.epsilon)
      << " seed=" << r.seed << ": " << r.warning;
    return o.str();
  }
  o << r.payload << ',' << r.kind << ',' << r.n << ',' << (r.q ? fmt_g(*r.q) : "") << ',' << fmt_g(r.epsilon) << ','
    << r.seed << ',' << r.main_bytes << ',' << r.guard << ',' << fmt_g(r.overhead) << ',' << fmt_g(r.p0) << ','
    << (r.exact ? "true" : "false");
  return o.str();
}

SweepRow sweep_pc(const SweepArgs& a, std::uint32_t k, double eps, std::uint64_t seed) {
  SweepRow r{"pc", a.kind, static_cast<std::uint64_t>(a.depth), 1.0 / k, eps, seed};
  std::optional<GuardConfig> cfg;
  try {
    cfg = octree_guard_config(k, eps);
    Safeguard check(*cfg);
  } catch (const Error& e) {
    r.warning = e.what();
    return r;
  }
  const VoxelCloud cloud = synth_cloud(a.kind == "sparse" ? CloudKind::Sparse : CloudKind::Dense, a.depth, a.points, seed);
  const GuardedStream s = encode_octree(cloud, *cfg);
  r.main_bytes = s.main.size();
  r.guard = guard_bytes(s);
  r.overhead = overhead_pct(s);
  r.p0 = s.p0_q16 / 65536.0;
  try {
    r.exact = decode_octree(read_container(write_container(s)), Perturbation{eps / 2, PerturbDist::Uniform, seed, 0}) ==
              cloud;
  } catch (const Error&) {
    r.exact = false;
  }
  return r;
}

SweepRow sweep_image(const SweepArgs& a, double eps, std::uint64_t seed) {
  SweepRow r{"image", "table1", std::uint64_t{a.height} * a.width * a.channels, std::nullopt, eps, seed};
  std::optional<GuardConfig> cfg;
  try {
    cfg = hyperprior_guard_config(eps);
    Safeguard check(*cfg);
  } catch (const Error& e) {
    r.warning = e.what();
    return r;
  }
  const LatentGrid lat = synth_latents(a.height, a.width, a.channels, seed);
  const GuardedStream s = encode_hyperprior(lat, *cfg);
  r.main_bytes = s.main.size();
  r.guard = guard_bytes(s);
  r.overhead = overhead_pct(s);
  r.p0 = s.p0_q16 / 65536.0;
  try {
    r.exact = decode_hyperprior(read_container(write_container(s)), Perturbation{eps / 2, PerturbDist::Uniform, seed, 0})
                  .y_hat == quantize_latents(lat.y);
  } catch (const Error&) {
    r.exact = false;
  }
  return r;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Line chart of overhead_pct against epsilon (log axis), one series per
// (payload, q, seed), built from the CSV file alone.
void write_svg(const std::string& csv_path, const std::string& svg_path) {
  std::ifstream in(csv_path);
  if (!in) fail(ErrorKind::Io, "cannot reopen " + csv_path);
  struct Point {
    double eps, ovh;
  };
  std::vector<std::pair<std::string, std::vector<Point>>> series;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto c = split_csv(line);
    if (c.size() != 11) fail(ErrorKind::Parse, "unexpected CSV row: " + line);
    const std::string key = c[0] + (c[3].empty() ? "" : " q=" + c[3]) + " seed=" + c[5];
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.first == key; });
    if (it == series.end()) it = series.insert(series.end(), {key, {}});
    it->second.push_back({std::stod(c[4]), std::stod(c[8])});
  }
  double emin = INFINITY, emax = -INFINITY, omax = 0.0;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.eps < b.eps; });
    for (const Point& p : pts) {
      emin = std::min(emin, std::log10(p.eps));
      emax = std::max(emax, std::log10(p.eps));
      omax = std::max(omax, p.ovh);
    }
  }
  if (!(emax > emin)) emin = emax - 1.0;
  if (!(omax > 0.0)) omax = 1.0;
  const double W = 640, H = 420, L = 70, R = 190, T = 30, B = 50;
  auto px = [&](double e) { return L + (std::log10(e) - emin) / (emax - emin) * (W - L - R); };
  auto py = [&](double o) { return H - B - o / (omax * 1.05) * (H - T - B); };
  std::ofstream out(svg_path);
  if (!out) fail(ErrorKind::Io, "cannot write " + svg_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">epsilon (log)</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\">overhead %</text>\n";
  for (int d = static_cast<int>(std::ceil(emin)); d <= static_cast<int>(std::floor(emax)); ++d)
    out << "<text x=\"" << px(std::pow(10.0, d)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">1e" << d
        << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double o = omax * 1.05 * i / 4;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(o) + 4 << "\" text-anchor=\"end\">" << fmt_g(std::round(o * 100) / 100)
        << "</text>\n";
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* col = colors[i % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const Point& p : series[i].second) out << px(p.eps) << ',' << py(p.ovh) << ' ';
    out << "\"/>\n";
    for (const Point& p : series[i].second)
      out << "<circle cx=\"" << px(p.eps) << "\" cy=\"" << py(p.ovh) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 * (i + 1) << "\" fill=\"" << col << "\">"
        << series[i].first << "</text>\n";
  }
  out << "</svg>\n";
}

int run_sweep(const SweepArgs& a) {
  struct Job {
    std::optional<std::uint32_t> k;
    double eps;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  if (a.payload == "pc") {
    for (std::uint32_t k : a.ks)
      for (double eps : a.epsilons)
        for (std::uint64_t seed : a.seeds) jobs.push_back({k, eps, seed});
  } else {
    for (double eps : a.epsilons)
      for (std::uint64_t seed : a.seeds) jobs.push_back({std::nullopt, eps, seed});
  }
  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    rows[i] = jobs[i].k ? sweep_pc(a, *jobs[i].k, jobs[i].eps, jobs[i].seed) : sweep_image(a, jobs[i].eps, jobs[i].seed);
  });
  std::ofstream out(a.out);
  if (!out) fail(ErrorKind::Io, "cannot write " + a.out);
  out << kCsvHeader << '\n';
  bool all_exact = true;
  for (const SweepRow& r : rows) {
    out << csv_line(r) << '\n';
    if (!r.warning.empty()) {
      std::cerr << "warning: " << csv_line(r).substr(11) << '\n';
      continue;
    }
    all_exact = all_exact && r.exact;
    std::printf("%s q=%s eps=%g seed=%llu main=%zu guard=%zu overhead=%.4f%% exact=%s\n", r.payload.c_str(),
                r.q ? fmt_g(*r.q).c_str() : "-", r.epsilon, static_cast<unsigned long long>(r.seed), r.main_bytes,
                r.guard, r.overhead, r.exact ? "true" : "false");
  }
  out.close();
  if (!a.svg.empty()) write_svg(a.out, a.svg);
  return all_exact ? kExact : kMismatch;
}

// ---- interop ---------------------------------------------------------------

struct InteropArgs {
  std::string payload = "pc", dist = "uniform", mode = "center", kind = "dense";
  int trials = 20;
  double epsilon = 1e-6, e = 5e-7;
  std::uint32_t k = 250;
  int depth = 10;
  std::size_t points = 100000;
  std::uint32_t height = 64, width = 64, channels = 8;
};

int run_interop(const InteropArgs& a) {
  const GuardMode mode = parse_guard_mode(a.mode);
  const PerturbDist dist = parse_perturb_dist(a.dist);
  std::optional<GuardConfig> cfg;
  if (a.payload == "pc")
    cfg = octree_guard_config(a.k, a.epsilon, mode);
  else
    cfg = hyperprior_guard_config(a.epsilon, mode);
  Safeguard check(*cfg);
  std::vector<int> exact(static_cast<std::size_t>(a.trials), 0);
  parallel_for(exact.size(), [&](std::size_t i) {
    const std::uint64_t seed = i + 1;
    const Perturbation p{a.e, dist, seed, 0};
    try {
      if (a.payload == "pc") {
        const auto cloud =
            synth_cloud(a.kind == "sparse" ? CloudKind::Sparse : CloudKind::Dense, a.depth, a.points, seed);
        exact[i] = decode_octree(read_container(write_container(encode_octree(cloud, *cfg))), p) == cloud;
      } else {
        const auto lat = synth_latents(a.height, a.width, a.channels, seed);
        exact[i] = decode_hyperprior(read_container(write_container(encode_hyperprior(lat, *cfg))), p).y_hat ==
                   quantize_latents(lat.y);
      }
    } catch (const Error&) {
      exact[i] = 0;
    }
  });
  int n_exact = 0;
  for (int x : exact) n_exact += x;
  std::printf("%s trials %d exact %d/%d (epsilon %g, e %g, %s)\n", a.payload.c_str(), a.trials, n_exact, a.trials,
              a.epsilon, a.e, a.dist.c_str());
  const bool in_contract = a.e < a.epsilon || dist == PerturbDist::None;
  if (!in_contract) {
    std::printf("OUT OF CONTRACT: e >= epsilon, exact rate %.1f%% carries no guarantee\n",
                a.trials ? 100.0 * n_exact / a.trials : 100.0);
    return kExact;
  }
  return n_exact == a.trials ? kExact : kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bit-exact reproducible decoding via safeguarded critical values"};
  app.require_subcommand(1);

  EncodePcArgs enc;
  auto* c_enc = app.add_subcommand("encode-pc", "Encode a PLY cloud, then verify with a simulated decoder platform");
  c_enc->add_option("--input", enc.input, "Input PLY")->required();
  c_enc->add_option("--output", enc.output, "Output .rgd")->required();
  c_enc->add_option("--mode", enc.mode, "Guard mode")->check(CLI::IsMember({"full", "left", "right", "center"}));
  c_enc->add_option("--epsilon", enc.epsilon, "Maximum tolerable error");
  c_enc->add_option("--k", enc.k, "Probability grid step q = 1/k");
  c_enc->add_option("--depth", enc.depth, "Bit depth for voxelizing float PLY input");
  c_enc->add_flag("--no-protect", enc.no_protect, "Disable safeguarding (failure demonstration)");
  enc.perturb.add_to(c_enc);

  DecodePcArgs dec;
  auto* c_dec = app.add_subcommand("decode-pc", "Decode an .rgd cloud on a simulated platform");
  c_dec->add_option("--input", dec.input, "Input .rgd")->required();
  c_dec->add_option("--output", dec.output, "Output PLY");
  c_dec->add_option("--reference", dec.reference, "PLY to compare against");
  dec.perturb.add_to(c_dec);

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Overhead sweep over (epsilon, q) and seeds to CSV (+SVG)");
  c_sw->add_option("--payload", sw.payload)->check(CLI::IsMember({"pc", "image"}));
  c_sw->add_option("--epsilons", sw.epsilons)->delimiter(',');
  c_sw->add_option("--ks", sw.ks)->delimiter(',');
  std::string seeds_text = "1";
  c_sw->add_option("--seeds", seeds_text, "Comma-separated seeds; an empty list writes only the header")
      ->expected(0, 1)
      ->default_str("");
  c_sw->add_option("--out", sw.out, "CSV path")->required();
  c_sw->add_option("--svg", sw.svg, "SVG chart path");
  c_sw->add_option("--kind", sw.kind)->check(CLI::IsMember({"dense", "sparse"}));
  c_sw->add_option("--depth", sw.depth)->check(CLI::Range(1, 21));
  c_sw->add_option("--points", sw.points)->check(CLI::PositiveNumber);
  c_sw->add_option("--height", sw.height)->check(CLI::PositiveNumber);
  c_sw->add_option("--width", sw.width)->check(CLI::PositiveNumber);
  c_sw->add_option("--channels", sw.channels)->check(CLI::PositiveNumber);

  InteropArgs io;
  auto* c_io = app.add_subcommand("interop", "Seeded encode/decode trials across simulated platforms");
  c_io->add_option("--payload", io.payload)->check(CLI::IsMember({"pc", "image"}));
  c_io->add_option("--trials", io.trials)->check(CLI::NonNegativeNumber);
  c_io->add_option("--epsilon", io.epsilon);
  c_io->add_option("--e", io.e)->check(CLI::NonNegativeNumber);
  c_io->add_option("--dist", io.dist)->check(CLI::IsMember({"none", "uniform", "adversarial"}));
  c_io->add_option("--mode", io.mode)->check(CLI::IsMember({"full", "left", "right", "center"}));
  c_io->add_option("--k", io.k);
  c_io->add_option("--kind", io.kind)->check(CLI::IsMember({"dense", "sparse"}));
  c_io->add_option("--depth", io.depth)->check(CLI::Range(1, 21));
  c_io->add_option("--points", io.points)->check(CLI::PositiveNumber);
  c_io->add_option("--height", io.height)->check(CLI::PositiveNumber);
  c_io->add_option("--width", io.width)->check(CLI::PositiveNumber);
  c_io->add_option("--channels", io.channels)->check(CLI::PositiveNumber);

  ImageArgs img;
  auto* c_img = app.add_subcommand("demo-image", "Encode synthetic latents, then verify on a simulated platform");
  c_img->add_option("--height", img.height)->check(CLI::PositiveNumber);
  c_img->add_option("--width", img.width)->check(CLI::PositiveNumber);
  c_img->add_option("--channels", img.channels)->check(CLI::PositiveNumber);
  c_img->add_option("--seed", img.seed);
  c_img->add_option("--epsilon", img.epsilon);
  c_img->add_option("--mode", img.mode)->check(CLI::IsMember({"full", "left", "right", "center"}));
  c_img->add_option("--output", img.output, "Write the .rgd stream here");
  c_img->add_flag("--no-protect", img.no_protect);
  img.perturb.add_to(c_img);

  ImageArgs dimg;
  auto* c_dimg = app.add_subcommand("decode-image", "Decode an .rgd latent stream on a simulated platform");
  c_dimg->add_option("--input", dimg.input)->required();
  c_dimg->add_option("--output", dimg.output, "Write decoded latents, one integer per line");
  auto* seed_opt = c_dimg->add_option("--seed", dimg.seed, "Compare against synthetic latents of this seed");
  dimg.perturb.add_to(c_dimg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_enc) return run_encode_pc(enc);
    if (*c_dec) return run_decode_pc(dec);
    if (*c_sw) {
      sw.seeds.clear();
      std::stringstream ss(seeds_text);
      for (std::string tok; std::getline(ss, tok, ',');) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
          v = std::stoull(tok, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok.size()) fail(ErrorKind::Parse, "bad seed '" + tok + "'");
        sw.seeds.push_back(v);
      }
      return run_sweep(sw);
    }
    if (*c_io) return run_interop(io);
    if (*c_img) return run_demo_image(img);
    if (*c_dimg) return run_decode_image(dimg, seed_opt->count() > 0);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
