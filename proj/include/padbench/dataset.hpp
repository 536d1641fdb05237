#pragma once

// Sample manifests for an ear PAD corpus: attack-instrument taxonomy,
// filename grammar, count audits and train/test splitting.
//
// Filename grammar (stem, extension ignored):
//   Cap_<CAP>_Disp_<DISP>[_subject<ID>][_<anything>]   display attack
//   Cap_<CAP>_Print_<PRN>[_subject<ID>][_<anything>]   photo-print attack
//   subject<ID>_<L|R>_<position>[_<anything>]          bona fide, structured
//   anything else                                      bona fide, no metadata

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "padbench/error.hpp"
#include "padbench/rng.hpp"

namespace padbench {

enum class Label { bona_fide, attack };
enum class AttackType { display, photo_print };
enum class Side { left, right, unknown };
enum class Position { up, down, front, forward, back, unknown };
enum class DeviceKind { capture, display, printer };

NLOHMANN_JSON_SERIALIZE_ENUM(Label, {{Label::bona_fide, "bona_fide"}, {Label::attack, "attack"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AttackType, {{AttackType::display, "display"},
                                          {AttackType::photo_print, "photo_print"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Side, {{Side::unknown, "unknown"}, {Side::left, "left"}, {Side::right, "right"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Position, {{Position::unknown, "unknown"},
                                        {Position::up, "up"},
                                        {Position::down, "down"},
                                        {Position::front, "front"},
                                        {Position::forward, "forward"},
                                        {Position::back, "back"}})

struct DeviceCode {
  std::string_view code;        // token used in filenames
  std::string_view name;        // full device name
  std::string_view short_name;  // fragment used in PAIS abbreviations
  DeviceKind kind;
};

inline constexpr std::array<DeviceCode, 6> device_codes{{
    {"N1020", "Nokia Lumia 1020", "NL1020", DeviceKind::capture},
    {"SGA7", "Samsung Galaxy A7", "GA7", DeviceKind::capture},
    {"SGS9", "Samsung Galaxy S9", "GS9", DeviceKind::capture},
    {"3D", "SAMSUNG C27JG50QQUX monitor", "S3D", DeviceKind::display},
    {"4K", "Dell UltraSharp 32 Ultra HD 4K Monitor", "Dell", DeviceKind::display},
    {"MFC", "Brother MFC-9340CDW printer", "Print", DeviceKind::printer},
}};

// Bona fide images are captured with this phone.
inline constexpr std::string_view bona_fide_capture_device = "Samsung Galaxy A7";

inline const DeviceCode* find_device_by_code(std::string_view code) {
  for (const auto& d : device_codes)
    if (d.code == code) return &d;
  return nullptr;
}

inline const DeviceCode* find_device_by_name(std::string_view name) {
  for (const auto& d : device_codes)
    if (d.name == name) return &d;
  return nullptr;
}

struct PAISDescriptor {
  AttackType attack_type = AttackType::display;
  std::string representor;
  std::string capture_device;
  std::string abbreviation;

  bool operator==(const PAISDescriptor&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PAISDescriptor, attack_type, representor, capture_device, abbreviation)

inline PAISDescriptor make_pais(const DeviceCode& capture, const DeviceCode& representor) {
  if (capture.kind != DeviceKind::capture)
    throw domain_error("'" + std::string(capture.code) + "' is not a capture device");
  if (representor.kind == DeviceKind::capture)
    throw domain_error("'" + std::string(representor.code) + "' is not a representor device");
  return {representor.kind == DeviceKind::printer ? AttackType::photo_print : AttackType::display,
          std::string(representor.name), std::string(capture.name),
          std::string(representor.short_name) + "-" + std::string(capture.short_name)};
}

// Filename codes for a PAIS abbreviation such as "Dell-GA7" or "Print-GA7".
struct PaisCodes {
  PAISDescriptor pais;
  std::string capture_code;
  std::string representor_code;
};

inline PaisCodes pais_from_abbreviation(std::string_view abbreviation) {
  for (const auto& rep : device_codes) {
    if (rep.kind == DeviceKind::capture) continue;
    for (const auto& cap : device_codes) {
      if (cap.kind != DeviceKind::capture) continue;
      auto p = make_pais(cap, rep);
      if (p.abbreviation == abbreviation)
        return {std::move(p), std::string(cap.code), std::string(rep.code)};
    }
  }
  throw domain_error("unknown PAIS abbreviation '" + std::string(abbreviation) + "'");
}

struct BonaFideName {
  std::optional<std::string> subject_id;
  Side side = Side::unknown;
  Position position = Position::unknown;

  bool operator==(const BonaFideName&) const = default;
};

struct AttackName {
  PAISDescriptor pais;
  std::optional<std::string> subject_id;

  bool operator==(const AttackName&) const = default;
};

using ParsedName = std::variant<BonaFideName, AttackName>;

namespace detail {

inline std::vector<std::string_view> split_tokens(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_subject_token(std::string_view t) {
  constexpr std::string_view prefix = "subject";
  if (t.size() <= prefix.size() || !t.starts_with(prefix)) return false;
  return std::all_of(t.begin() + prefix.size(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::optional<Position> position_from_token(std::string_view t) {
  if (t == "up") return Position::up;
  if (t == "down") return Position::down;
  if (t == "front") return Position::front;
  if (t == "forward") return Position::forward;
  if (t == "back") return Position::back;
  return std::nullopt;
}

inline std::string_view stem_of(std::string_view name) {
  const auto slash = name.find_last_of("/\\");
  if (slash != std::string_view::npos) name.remove_prefix(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string_view::npos && dot > 0) name = name.substr(0, dot);
  return name;
}

}  // namespace detail

inline ParsedName parse_filename(std::string_view name) {
  if (name.empty()) throw parse_error("empty filename");
  const auto stem = detail::stem_of(name);
  const auto tokens = detail::split_tokens(stem, '_');

  if (tokens.front() == "Cap" && tokens.size() > 1) {
    if (tokens.size() < 4)
      throw parse_error("truncated attack name '" + std::string(name) + "'");
    const auto* capture = find_device_by_code(tokens[1]);
    if (!capture || capture->kind != DeviceKind::capture)
      throw parse_error("unknown capture device code '" + std::string(tokens[1]) + "' in '" +
                        std::string(name) + "'");
    const auto kind_token = tokens[2];
    if (kind_token != "Disp" && kind_token != "Print")
      throw parse_error("unknown attack kind '" + std::string(kind_token) + "' in '" + std::string(name) +
                        "'");
    const auto* rep = find_device_by_code(tokens[3]);
    const auto wanted = kind_token == "Disp" ? DeviceKind::display : DeviceKind::printer;
    if (!rep || rep->kind != wanted)
      throw parse_error("unknown " + std::string(kind_token == "Disp" ? "display" : "printer") +
                        " device code '" + std::string(tokens[3]) + "' in '" + std::string(name) + "'");
    AttackName out{make_pais(*capture, *rep), std::nullopt};
    if (tokens.size() > 4 && detail::is_subject_token(tokens[4])) out.subject_id = std::string(tokens[4]);
    return out;
  }

  BonaFideName out;
  if (tokens.size() >= 3 && detail::is_subject_token(tokens[0]) && (tokens[1] == "L" || tokens[1] == "R")) {
    if (auto pos = detail::position_from_token(tokens[2])) {
      out.subject_id = std::string(tokens[0]);
      out.side = tokens[1] == "L" ? Side::left : Side::right;
      out.position = *pos;
    }
  }
  return out;
}

struct SampleRecord {
  std::string path;  // relative to the manifest root, '/' separated
  Label label = Label::bona_fide;
  std::optional<std::string> subject_id;
  Side side = Side::unknown;
  Position position = Position::unknown;
  std::optional<PAISDescriptor> pais;
  std::string capture_device;

  bool operator==(const SampleRecord&) const = default;
};

struct SkippedFile {
  std::string path;
  std::string reason;

  bool operator==(const SkippedFile&) const = default;
};

struct ManifestCounts {
  std::size_t bona_fide = 0;
  std::map<std::string, std::size_t> per_pais;

  bool operator==(const ManifestCounts&) const = default;
};

struct Manifest {
  std::string root;
  std::vector<SampleRecord> samples;
  std::vector<PAISDescriptor> pais_catalog;
  // Image totals claimed per representor (e.g. from a dataset card).
  std::map<std::string, std::size_t> declared_totals;
  std::vector<SkippedFile> skipped;

  ManifestCounts counts() const {
    ManifestCounts c;
    for (const auto& s : samples) {
      if (s.label == Label::bona_fide)
        ++c.bona_fide;
      else if (s.pais)
        ++c.per_pais[s.pais->abbreviation];
    }
    return c;
  }

  std::set<std::string> subjects() const {
    std::set<std::string> out;
    for (const auto& s : samples)
      if (s.label == Label::bona_fide && s.subject_id) out.insert(*s.subject_id);
    return out;
  }

  const PAISDescriptor* find_pais(std::string_view abbreviation) const {
    for (const auto& p : pais_catalog)
      if (p.abbreviation == abbreviation) return &p;
    return nullptr;
  }

  std::filesystem::path resolve(const SampleRecord& s) const { return std::filesystem::path(root) / s.path; }

  bool operator==(const Manifest&) const = default;
};

// Deduplicated catalog of the PAIS referenced by `samples`, sorted by abbreviation.
inline std::vector<PAISDescriptor> derive_catalog(const std::vector<SampleRecord>& samples) {
  std::map<std::string, PAISDescriptor> by_abbr;
  for (const auto& s : samples)
    if (s.pais) by_abbr.emplace(s.pais->abbreviation, *s.pais);
  std::vector<PAISDescriptor> out;
  for (auto& [_, p] : by_abbr) out.push_back(p);
  return out;
}

inline SampleRecord record_from_name(std::string relative_path, const ParsedName& parsed) {
  SampleRecord r;
  r.path = std::move(relative_path);
  if (const auto* a = std::get_if<AttackName>(&parsed)) {
    r.label = Label::attack;
    r.subject_id = a->subject_id;
    r.pais = a->pais;
    r.capture_device = a->pais.capture_device;
  } else {
    const auto& b = std::get<BonaFideName>(parsed);
    r.label = Label::bona_fide;
    r.subject_id = b.subject_id;
    r.side = b.side;
    r.position = b.position;
    r.capture_device = std::string(bona_fide_capture_device);
  }
  return r;
}

inline bool has_image_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

// Scans `root` recursively. Files the grammar rejects, and non-image files, end
// up in Manifest::skipped with a reason.
inline Manifest build_manifest(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw io_error("dataset root '" + root.string() + "' is not a directory");

  std::vector<std::string> files;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root).generic_string());
  }
  if (ec) throw io_error("cannot scan '" + root.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());

  Manifest m;
  m.root = root.string();
  for (auto& rel : files) {
    if (!has_image_extension(rel)) {
      m.skipped.push_back({rel, "not an image file"});
      continue;
    }
    try {
      m.samples.push_back(record_from_name(rel, parse_filename(rel)));
    } catch (const parse_error& e) {
      m.skipped.push_back({rel, e.what()});
    }
  }
  if (m.samples.empty())
    throw domain_error("no recognized samples under '" + root.string() + "' (" +
                       std::to_string(m.skipped.size()) + " skipped)");
  m.pais_catalog = derive_catalog(m.samples);
  return m;
}

struct Finding {
  std::string kind;     // "count mismatch", "missing subject", ...
  std::string subject;  // sample path, representor or PAIS the finding is about
  std::string message;

  bool operator==(const Finding&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Finding, kind, subject, message)

struct ValidateOptions {
  bool check_files = true;
};

// Empty result means the manifest passed every check.
inline std::vector<Finding> validate_manifest(const Manifest& m, ValidateOptions options = {}) {
  std::vector<Finding> findings;

  std::set<std::string> seen;
  for (const auto& p : m.pais_catalog) {
    if (!seen.insert(p.abbreviation).second)
      findings.push_back({"duplicate abbreviation", p.abbreviation, "abbreviation listed more than once"});
    if (const auto* dev = find_device_by_name(p.representor)) {
      const bool printer = dev->kind == DeviceKind::printer;
      if ((p.attack_type == AttackType::photo_print) != printer)
        findings.push_back({"attack type mismatch", p.abbreviation,
                            "representor '" + p.representor + "' does not match the attack type"});
    }
  }

  for (const auto& s : m.samples) {
    if ((s.label == Label::attack) != s.pais.has_value()) {
      findings.push_back({"label mismatch", s.path, "attack samples must carry a PAIS and only they may"});
      continue;
    }
    if (s.label == Label::bona_fide && (!s.subject_id || s.subject_id->empty()))
      findings.push_back({"missing subject", s.path, "bona fide sample has no subject id"});
    if (s.pais) {
      const auto* p = m.find_pais(s.pais->abbreviation);
      if (!p || *p != *s.pais)
        findings.push_back({"unknown pais", s.path, "PAIS '" + s.pais->abbreviation + "' is not in the catalog"});
    }
    if (options.check_files) {
      std::ifstream in(m.resolve(s), std::ios::binary);
      if (!in) findings.push_back({"unreadable file", s.path, "file missing or unreadable"});
    }
  }

  // Per representor: declared total must equal the sum over capture devices.
  const auto counts = m.counts();
  std::map<std::string, std::size_t> per_representor;
  for (const auto& [abbr, n] : counts.per_pais) {
    const auto* p = m.find_pais(abbr);
    if (p) per_representor[p->representor] += n;
  }
  for (const auto& [representor, declared] : m.declared_totals) {
    const auto it = per_representor.find(representor);
    const std::size_t actual = it == per_representor.end() ? 0 : it->second;
    if (actual != declared)
      findings.push_back({"count mismatch", representor,
                          "capture-device counts sum to " + std::to_string(actual) + " but total is " +
                              std::to_string(declared)});
  }
  return findings;
}

struct RandomBySubject {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

// The held-out PAIS goes entirely to test; the rest is split as RandomBySubject.
struct LeaveOnePaisOut {
  std::string held_out_pais;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

using SplitSpec = std::variant<RandomBySubject, LeaveOnePaisOut>;

struct SplitResult {
  Manifest train;
  Manifest test;
};

namespace detail {

inline Manifest partition(const Manifest& source, std::vector<SampleRecord> samples) {
  Manifest m;
  m.root = source.root;
  m.samples = std::move(samples);
  m.pais_catalog = derive_catalog(m.samples);
  return m;
}

inline std::size_t test_share(std::size_t n, double fraction) {
  auto k = static_cast<std::size_t>(fraction * static_cast<double>(n) + 0.5);
  return std::clamp<std::size_t>(k, 1, n - 1);
}

inline SplitResult split_by_subject(const Manifest& m, const std::vector<std::size_t>& indices, double fraction,
                                    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw domain_error("test fraction must lie in (0, 1), got " + std::to_string(fraction));
  std::set<std::string> subject_set;
  for (auto i : indices) {
    const auto& s = m.samples[i];
    if (s.label == Label::bona_fide) {
      if (!s.subject_id) throw domain_error("bona fide sample '" + s.path + "' has no subject id");
      subject_set.insert(*s.subject_id);
    }
  }
  if (subject_set.size() < 2)
    throw domain_error("subject-disjoint split needs at least 2 subjects, found " +
                       std::to_string(subject_set.size()));

  Rng rng(mix_seed(seed, 0x5b));
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
  rng.shuffle(subjects);
  const auto n_test = test_share(subjects.size(), fraction);
  const std::set<std::string> test_subjects(subjects.begin(), subjects.begin() + static_cast<long>(n_test));

  std::vector<SampleRecord> train, test;
  // Attacks without a known subject are assigned per PAIS by the same seed.
  std::map<std::string, std::vector<std::size_t>> orphan_attacks;
  for (auto i : indices) {
    const auto& s = m.samples[i];
    if (s.subject_id && subject_set.contains(*s.subject_id)) {
      (test_subjects.contains(*s.subject_id) ? test : train).push_back(s);
    } else if (s.label == Label::attack) {
      orphan_attacks[s.pais->abbreviation].push_back(i);
    } else {
      train.push_back(s);
    }
  }
  for (auto& [abbr, group] : orphan_attacks) {
    rng.shuffle(group);
    const auto k = static_cast<std::size_t>(fraction * static_cast<double>(group.size()) + 0.5);
    std::set<std::size_t> chosen(group.begin(), group.begin() + static_cast<long>(k));
    for (auto i : group) (chosen.contains(i) ? test : train).push_back(m.samples[i]);
  }
  auto by_path = [](const SampleRecord& a, const SampleRecord& b) { return a.path < b.path; };
  std::sort(train.begin(), train.end(), by_path);
  std::sort(test.begin(), test.end(), by_path);
  return {partition(m, std::move(train)), partition(m, std::move(test))};
}

}  // namespace detail

inline SplitResult split(const Manifest& m, const SplitSpec& spec) {
  if (const auto* r = std::get_if<RandomBySubject>(&spec)) {
    std::vector<std::size_t> all(m.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return detail::split_by_subject(m, all, r->test_fraction, r->seed);
  }
  const auto& loco = std::get<LeaveOnePaisOut>(spec);
  if (!m.find_pais(loco.held_out_pais))
    throw domain_error("held-out PAIS '" + loco.held_out_pais + "' is not in the catalog");
  std::vector<std::size_t> rest;
  std::vector<SampleRecord> held;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const auto& s = m.samples[i];
    if (s.pais && s.pais->abbreviation == loco.held_out_pais)
      held.push_back(s);
    else
      rest.push_back(i);
  }
  auto result = detail::split_by_subject(m, rest, loco.test_fraction, loco.seed);
  auto test = std::move(result.test.samples);
  test.insert(test.end(), held.begin(), held.end());
  std::sort(test.begin(), test.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  result.test = detail::partition(m, std::move(test));
  return result;
}

// ---- persistence ----------------------------------------------------------

inline constexpr int manifest_schema_version = 1;

inline nlohmann::json to_json(const SampleRecord& s) {
  nlohmann::json j{{"path", s.path},
                   {"label", s.label},
                   {"side", s.side},
                   {"position", s.position},
                   {"capture_device", s.capture_device}};
  j["subject_id"] = s.subject_id ? nlohmann::json(*s.subject_id) : nlohmann::json(nullptr);
  j["pais"] = s.pais ? nlohmann::json(s.pais->abbreviation) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["schema_version"] = manifest_schema_version;
  j["root"] = m.root;
  j["pais_catalog"] = m.pais_catalog;
  auto& samples = j["samples"] = nlohmann::json::array();
  for (const auto& s : m.samples) samples.push_back(to_json(s));
  j["declared_totals"] = m.declared_totals;
  auto& skipped = j["skipped"] = nlohmann::json::array();
  for (const auto& s : m.skipped) skipped.push_back({{"path", s.path}, {"reason", s.reason}});
  const auto c = m.counts();
  j["counts"] = {{"bona_fide", c.bona_fide}, {"per_pais", c.per_pais}};
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != manifest_schema_version)
      throw format_error("unsupported manifest schema_version " + j.at("schema_version").dump());
    Manifest m;
    m.root = j.at("root").get<std::string>();
    m.pais_catalog = j.at("pais_catalog").get<std::vector<PAISDescriptor>>();
    for (const auto& js : j.at("samples")) {
      SampleRecord s;
      s.path = js.at("path").get<std::string>();
      s.label = js.at("label").get<Label>();
      s.side = js.at("side").get<Side>();
      s.position = js.at("position").get<Position>();
      s.capture_device = js.at("capture_device").get<std::string>();
      if (!js.at("subject_id").is_null()) s.subject_id = js.at("subject_id").get<std::string>();
      if (!js.at("pais").is_null()) {
        const auto abbr = js.at("pais").get<std::string>();
        const auto* p = m.find_pais(abbr);
        if (!p) throw format_error("sample '" + s.path + "' references unknown PAIS '" + abbr + "'");
        s.pais = *p;
      }
      m.samples.push_back(std::move(s));
    }
    if (j.contains("declared_totals"))
      m.declared_totals = j.at("declared_totals").get<std::map<std::string, std::size_t>>();
    if (j.contains("skipped"))
      for (const auto& js : j.at("skipped"))
        m.skipped.push_back({js.at("path").get<std::string>(), js.at("reason").get<std::string>()});
    if (j.contains("counts")) {
      ManifestCounts stored{j.at("counts").at("bona_fide").get<std::size_t>(),
                            j.at("counts").at("per_pais").get<std::map<std::string, std::size_t>>()};
      if (stored != m.counts()) throw format_error("stored counts disagree with the sample list");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("malformed manifest: ") + e.what());
  }
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write manifest '" + path.string() + "'");
  out << to_json(m).dump(2) << '\n';
  if (!out) throw io_error("failed writing manifest '" + path.string() + "'");
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw format_error("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace padbench
