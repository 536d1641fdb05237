#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "padbench/dataset.hpp"
#include "test_support.hpp"

using namespace padbench;
using padbench::testing::TempDir;

namespace {

void touch(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << "x";
}

SampleRecord attack_record(const std::string& path, const std::string& abbr, std::optional<std::string> subject = {}) {
  SampleRecord r;
  r.path = path;
  r.label = Label::attack;
  r.pais = pais_from_abbreviation(abbr).pais;
  r.capture_device = r.pais->capture_device;
  r.subject_id = std::move(subject);
  return r;
}

SampleRecord bona_record(const std::string& path, const std::string& subject) {
  SampleRecord r;
  r.path = path;
  r.subject_id = subject;
  r.capture_device = std::string(bona_fide_capture_device);
  return r;
}

// Stub manifest with `per_pais[abbr]` attack samples and the given declared totals.
Manifest count_stub(const std::map<std::string, std::size_t>& per_pais,
                    const std::map<std::string, std::size_t>& declared) {
  Manifest m;
  m.root = "/nonexistent";
  for (const auto& [abbr, n] : per_pais)
    for (std::size_t i = 0; i < n; ++i) m.samples.push_back(attack_record(abbr + "/" + std::to_string(i) + ".jpg", abbr));
  m.pais_catalog = derive_catalog(m.samples);
  m.declared_totals = declared;
  return m;
}

const std::string dell = "Dell UltraSharp 32 Ultra HD 4K Monitor";
const std::string samsung = "SAMSUNG C27JG50QQUX monitor";

}  // namespace

TEST(ParseFilename, DisplayAttackFromCaptionExample) {
  const auto p = parse_filename("Cap_N1020_Disp_3D_0012.jpg");
  const auto& a = std::get<AttackName>(p);
  EXPECT_EQ(a.pais.capture_device, "Nokia Lumia 1020");
  EXPECT_EQ(a.pais.representor, samsung);
  EXPECT_EQ(a.pais.attack_type, AttackType::display);
  EXPECT_EQ(a.pais.abbreviation, "S3D-NL1020");
  EXPECT_FALSE(a.subject_id);
}

TEST(ParseFilename, PrintAttack) {
  const auto a = std::get<AttackName>(parse_filename("Cap_SGA7_Print_MFC_0001.jpg"));
  EXPECT_EQ(a.pais.capture_device, "Samsung Galaxy A7");
  EXPECT_EQ(a.pais.representor, "Brother MFC-9340CDW printer");
  EXPECT_EQ(a.pais.attack_type, AttackType::photo_print);
  EXPECT_EQ(a.pais.abbreviation, "Print-GA7");
}

TEST(ParseFilename, AttackWithSubject) {
  const auto a = std::get<AttackName>(parse_filename("dir/Cap_SGS9_Disp_4K_subject007_0003.png"));
  EXPECT_EQ(a.pais.abbreviation, "Dell-GS9");
  EXPECT_EQ(a.subject_id, "subject007");
}

TEST(ParseFilename, BonaFide) {
  const auto b = std::get<BonaFideName>(parse_filename("subject042_L_front_03.jpg"));
  EXPECT_EQ(b.subject_id, "subject042");
  EXPECT_EQ(b.side, Side::left);
  EXPECT_EQ(b.position, Position::front);
  const auto plain = std::get<BonaFideName>(parse_filename("IMG_2231.jpg"));
  EXPECT_FALSE(plain.subject_id);
  EXPECT_EQ(plain.side, Side::unknown);
}

TEST(ParseFilename, UnknownTokensAreNamed) {
  try {
    parse_filename("Cap_XX_Disp_3D_1.jpg");
    FAIL();
  } catch (const parse_error& e) {
    EXPECT_NE(std::string(e.what()).find("'XX'"), std::string::npos);
  }
  EXPECT_THROW(parse_filename("Cap_SGA7_Disp_MFC_1.jpg"), parse_error);  // printer on a display slot
  EXPECT_THROW(parse_filename("Cap_SGA7_Scan_4K_1.jpg"), parse_error);
  EXPECT_THROW(parse_filename("Cap_SGA7.jpg"), parse_error);
  EXPECT_THROW(parse_filename(""), parse_error);
}

TEST(ParseFilename, InjectiveOverDeviceTriples) {
  std::set<std::string> abbreviations;
  int n = 0;
  for (const auto& cap : device_codes) {
    if (cap.kind != DeviceKind::capture) continue;
    for (const auto& rep : device_codes) {
      if (rep.kind == DeviceKind::capture) continue;
      const std::string kind = rep.kind == DeviceKind::printer ? "Print" : "Disp";
      const auto name = "Cap_" + std::string(cap.code) + "_" + kind + "_" + std::string(rep.code) + "_1.jpg";
      const auto a = std::get<AttackName>(parse_filename(name));
      EXPECT_EQ(a.pais.capture_device, cap.name);
      EXPECT_EQ(a.pais.representor, rep.name);
      abbreviations.insert(a.pais.abbreviation);
      // abbreviation maps back to the same codes
      const auto codes = pais_from_abbreviation(a.pais.abbreviation);
      EXPECT_EQ(codes.capture_code, cap.code);
      EXPECT_EQ(codes.representor_code, rep.code);
      ++n;
    }
  }
  EXPECT_EQ(static_cast<int>(abbreviations.size()), n);
  EXPECT_EQ(n, 9);
}

TEST(PaisAbbreviation, TableSpellings) {
  for (const auto* a : {"Dell-GA7", "Dell-GS9", "Dell-NL1020", "S3D-GA7", "S3D-GS9", "S3D-NL1020", "Print-GA7"})
    EXPECT_EQ(pais_from_abbreviation(a).pais.abbreviation, a);
  EXPECT_THROW(pais_from_abbreviation("Print-SGA7"), domain_error);
}

TEST(BuildManifest, CountsAndSkips) {
  TempDir d("ingest");
  for (const auto* f : {"subject001_L_up_01.jpg", "subject001_R_up_02.jpg", "subject002_L_down_01.png",
                        "Cap_SGA7_Disp_4K_0001.jpg", "nested/Cap_SGA7_Disp_4K_0002.jpg", "Cap_XX_Disp_3D_1.jpg",
                        "notes.txt"})
    touch(d.path() / f);
  const auto m = build_manifest(d.path());
  EXPECT_EQ(m.samples.size(), 5u);
  EXPECT_EQ(m.pais_catalog.size(), 1u);
  const auto c = m.counts();
  EXPECT_EQ(c.bona_fide, 3u);
  EXPECT_EQ(c.per_pais.at("Dell-GA7"), 2u);
  ASSERT_EQ(m.skipped.size(), 2u);
  EXPECT_EQ(m.skipped[0].path, "Cap_XX_Disp_3D_1.jpg");
  EXPECT_EQ(m.skipped[1].path, "notes.txt");
  EXPECT_EQ(m.subjects(), (std::set<std::string>{"subject001", "subject002"}));
  EXPECT_EQ(m.samples[1].path, "nested/Cap_SGA7_Disp_4K_0002.jpg");  // byte order of paths
  EXPECT_TRUE(validate_manifest(m).empty());
}

TEST(BuildManifest, Errors) {
  TempDir d("empty");
  EXPECT_THROW(build_manifest(d.path()), domain_error);
  EXPECT_THROW(build_manifest(d.path() / "missing"), io_error);
  touch(d.path() / "Cap_XX_Disp_3D_1.jpg");
  EXPECT_THROW(build_manifest(d.path()), domain_error);
}

TEST(ValidateManifest, PublishedGroupSumsPass) {
  const auto m = count_stub({{"Dell-GA7", 2134}, {"Dell-GS9", 2827}, {"Dell-NL1020", 101},
                             {"S3D-GA7", 16}, {"S3D-GS9", 2026}, {"S3D-NL1020", 1369}, {"Print-GA7", 189}},
                            {{dell, 5062}, {samsung, 3411}, {"Brother MFC-9340CDW printer", 189}});
  EXPECT_TRUE(validate_manifest(m, {.check_files = false}).empty());
}

TEST(ValidateManifest, GroupSumMismatch) {
  const auto m = count_stub({{"Dell-GA7", 10}, {"Dell-GS9", 10}}, {{dell, 21}});
  const auto f = validate_manifest(m, {.check_files = false});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].kind, "count mismatch");
  EXPECT_EQ(f[0].subject, dell);
}

TEST(ValidateManifest, StructuralFindings) {
  Manifest m;
  m.root = "/nonexistent";
  m.samples.push_back(bona_record("a.jpg", "s1"));
  auto nosubj = bona_record("b.jpg", "s1");
  nosubj.subject_id.reset();
  m.samples.push_back(nosubj);
  m.samples.push_back(attack_record("c.jpg", "Dell-GA7"));  // catalog left empty
  auto bad = bona_record("d.jpg", "s2");
  bad.label = Label::attack;
  m.samples.push_back(bad);
  auto kinds = [](const std::vector<Finding>& fs) {
    std::multiset<std::string> k;
    for (const auto& f : fs) k.insert(f.kind);
    return k;
  };
  EXPECT_EQ(kinds(validate_manifest(m, {.check_files = false})),
            (std::multiset<std::string>{"missing subject", "unknown pais", "label mismatch"}));
  const auto with_files = validate_manifest(m);
  EXPECT_EQ(kinds(with_files).count("unreadable file"), 3u);

  Manifest dup;
  auto p = pais_from_abbreviation("Print-GA7").pais;
  dup.pais_catalog = {p, p};
  p.attack_type = AttackType::display;
  dup.pais_catalog.push_back(p);
  const auto k = kinds(validate_manifest(dup, {.check_files = false}));
  EXPECT_EQ(k.count("duplicate abbreviation"), 2u);
  EXPECT_EQ(k.count("attack type mismatch"), 1u);
}

namespace {

Manifest random_manifest(std::mt19937_64& rng, int subjects) {
  Manifest m;
  m.root = "/r";
  const std::vector<std::string> pais{"Dell-GA7", "S3D-GS9", "Print-GA7"};
  for (int s = 0; s < subjects; ++s) {
    const auto sid = "subject" + std::to_string(100 + s);
    for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k)
      m.samples.push_back(bona_record(sid + "_L_up_" + std::to_string(k) + ".jpg", sid));
    for (int k = 0; k < static_cast<int>(rng() % 3); ++k) {
      const auto& p = pais[rng() % pais.size()];
      m.samples.push_back(attack_record("Cap_" + sid + "_" + p + std::to_string(k) + ".jpg", p, sid));
    }
  }
  for (int k = 0; k < static_cast<int>(rng() % 6); ++k) {
    const auto& p = pais[rng() % pais.size()];
    m.samples.push_back(attack_record("orphan_" + p + std::to_string(k) + ".jpg", p));
  }
  std::sort(m.samples.begin(), m.samples.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  m.pais_catalog = derive_catalog(m.samples);
  return m;
}

std::multiset<std::string> paths(const Manifest& m) {
  std::multiset<std::string> out;
  for (const auto& s : m.samples) out.insert(s.path);
  return out;
}

}  // namespace

TEST(Split, SubjectDisjointPartitionProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = random_manifest(rng, 2 + static_cast<int>(rng() % 12));
    const double fraction = 0.1 + 0.1 * static_cast<double>(rng() % 8);
    const auto r = split(m, RandomBySubject{fraction, rng()});
    auto all = paths(r.train);
    for (const auto& p : paths(r.test)) {
      EXPECT_FALSE(paths(r.train).contains(p));
      all.insert(p);
    }
    EXPECT_EQ(all, paths(m));
    std::set<std::string> train_subjects, test_subjects;
    for (const auto& s : r.train.samples)
      if (s.subject_id) train_subjects.insert(*s.subject_id);
    for (const auto& s : r.test.samples)
      if (s.subject_id) {
        test_subjects.insert(*s.subject_id);
        EXPECT_FALSE(train_subjects.contains(*s.subject_id));
      }
    EXPECT_FALSE(test_subjects.empty());
    EXPECT_FALSE(train_subjects.empty());
  }
}

TEST(Split, DeterministicPerSeed) {
  std::mt19937_64 rng(5);
  const auto m = random_manifest(rng, 10);
  const auto a = split(m, RandomBySubject{0.3, 42});
  const auto b = split(m, RandomBySubject{0.3, 42});
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, LeaveOnePaisOutScan) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = random_manifest(rng, 3 + static_cast<int>(rng() % 8));
    if (!m.find_pais("Print-GA7")) continue;
    std::size_t held = 0;
    for (const auto& s : m.samples) held += s.pais && s.pais->abbreviation == "Print-GA7";
    const auto r = split(m, LeaveOnePaisOut{"Print-GA7", 0.25, rng()});
    for (const auto& s : r.train.samples) EXPECT_FALSE(s.pais && s.pais->abbreviation == "Print-GA7");
    std::size_t in_test = 0;
    for (const auto& s : r.test.samples) in_test += s.pais && s.pais->abbreviation == "Print-GA7";
    EXPECT_EQ(in_test, held);
    EXPECT_EQ(r.train.samples.size() + r.test.samples.size(), m.samples.size());
  }
}

TEST(Split, Errors) {
  Manifest one;
  one.root = "/r";
  one.samples = {bona_record("a.jpg", "s1"), bona_record("b.jpg", "s1")};
  EXPECT_THROW(split(one, RandomBySubject{}), domain_error);
  one.samples.push_back(bona_record("c.jpg", "s2"));
  EXPECT_THROW(split(one, LeaveOnePaisOut{"Print-GA7"}), domain_error);
  EXPECT_THROW(split(one, RandomBySubject{1.0, 0}), domain_error);
  EXPECT_THROW(split(one, RandomBySubject{0.0, 0}), domain_error);
}

TEST(ManifestJson, RoundTrip) {
  std::mt19937_64 rng(1);
  auto m = random_manifest(rng, 5);
  m.declared_totals = {{dell, 3}};
  m.skipped = {{"x.txt", "not an image file"}};
  TempDir d("json");
  save_manifest(m, d / "m.json");
  EXPECT_EQ(load_manifest(d / "m.json"), m);
}

TEST(ManifestJson, RejectsBadDocuments) {
  TempDir d("badjson");
  std::ofstream(d / "bad.json") << "{not json";
  EXPECT_THROW(load_manifest(d / "bad.json"), format_error);
  EXPECT_THROW(load_manifest(d / "missing.json"), io_error);

  std::mt19937_64 rng(2);
  auto j = to_json(random_manifest(rng, 3));
  j["schema_version"] = 2;
  EXPECT_THROW(manifest_from_json(j), format_error);
  j["schema_version"] = 1;
  j["counts"]["bona_fide"] = 99999;
  EXPECT_THROW(manifest_from_json(j), format_error);
}
