#include "starcube/etl/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"
#include "starcube/etl/fuzzy.hpp"
#include "starcube/schema/catalog.hpp"

namespace starcube::etl {

using nlohmann::ordered_json;

namespace {

// std distributions differ between standard libraries; these do not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kFirstNames = {
    "Ahmed", "Mohamed", "Mahmoud", "Mostafa", "Omar",   "Youssef", "Khaled", "Hassan",
    "Ibrahim", "Ali",   "Fatma",   "Mona",    "Aya",    "Nour",    "Salma",  "Heba",
    "Mariam", "Hoda",   "Dina",    "Samira",  "Karim",  "Tarek",   "Amr",    "Reem"};
const std::vector<std::string> kFamilyNames = {
    "Abdelrahman", "El-Sayed", "Hassan", "Mansour", "Farouk", "Gamal",  "Saleh",
    "Shawky",      "Fathy",    "Nasser", "Ragab",   "Zaki",   "Hamdy",  "Soliman"};
const std::vector<std::string> kTowns = {
    "Zagazig", "Belbeis", "Minya al-Qamh", "Abu Hammad", "Faqous", "Hehia",
    "Abu Kabir", "Diyarb Negm", "Kafr Saqr", "Mashtoul el-Souk"};
const std::vector<std::string> kStreets = {
    "El-Galaa St.", "Saad Zaghloul St.", "El-Tahrir St.", "Farouk St.", "El-Nasr St.",
    "Orabi St.", "El-Mahatta St."};

const std::array<std::pair<const char*, const char*>, 11> kProcedures = {{
    {"Biopsy", "medical tests"},
    {"CT Scan", "rays"},
    {"Complete Blood Count", "medical tests"},
    {"Liver Function Test", "medical tests"},
    {"Mammography", "rays"},
    {"MRI Scan", "rays"},
    {"PET Scan", "rays"},
    {"Tumor Markers", "medical tests"},
    {"Ultrasound", "rays"},
    {"Urine Analysis", "medical tests"},
    {"X-Ray", "rays"},
}};

const std::vector<std::string> kAgeWords = {"forty", "sixty-two", "unknown", "n/a", "old"};

constexpr std::size_t kMinTypoLength = 5;
constexpr double kThreshold = 0.8;

std::vector<std::string> domain_of(const schema::SchemaCatalog& c, const char* dim,
                                   const char* attr) {
  return c.find_dimension(dim)->find_attribute(attr)->domain;
}

// One letter substituted, inserted or deleted. Retries until the original is
// the strict best match among `domain` at the fuzzy threshold, so the edit
// can always be undone.
std::string make_typo(Rng& rng, const std::string& original, const std::vector<std::string>& domain) {
  static const std::string kLetters = "abcdefghijklmnopqrstuvwxyz";
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::string t = original;
    auto op = rng.below(3);
    if (op == 0) {
      auto pos = rng.below(t.size());
      t[pos] = kLetters[rng.below(kLetters.size())];
    } else if (op == 1) {
      auto pos = rng.below(t.size() + 1);
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(pos), kLetters[rng.below(kLetters.size())]);
    } else {
      auto pos = 1 + rng.below(t.size() - 2);
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(pos));
    }
    if (normalize_for_match(t) == normalize_for_match(original)) continue;
    if (similarity(t, original) < kThreshold) continue;
    bool strict_best = std::none_of(domain.begin(), domain.end(), [&](const std::string& d) {
      return d != original && similarity(t, d) >= similarity(t, original);
    });
    if (strict_best) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "cannot perturb \"" + original + "\"");
}

std::string money(std::int64_t cents) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(cents / 100),
                static_cast<long long>(cents % 100));
  return buf;
}

struct Totals {
  std::int64_t cost_raw = 0;  // Decimal raw units
  std::int64_t quantity = 0;
  std::int64_t count = 0;

  void add(std::int64_t cents, std::int64_t qty) {
    cost_raw += cents * (Decimal::kScale / 100);
    quantity += qty;
    ++count;
  }
  ordered_json to_json() const {
    return {{"cost", Decimal::from_raw(cost_raw).to_string()},
            {"quantity", quantity},
            {"count", count}};
  }
};

}  // namespace

const std::string& SyntheticDataset::file(const std::string& name) const {
  for (const auto& f : files) {
    if (f.name == name) return f.content;
  }
  throw Error(ErrorCode::InvalidArgument, "dataset has no file " + name);
}

SyntheticDataset generate_synthetic(const GeneratorOptions& opt) {
  if (opt.patients == 0 || opt.facts == 0) {
    throw Error(ErrorCode::InvalidArgument, "patient and fact counts must be positive");
  }
  if (!(opt.typo_rate >= 0.0 && opt.typo_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "typo rate must be within [0,1]");
  }
  const auto catalog = schema::reference_schema();
  const auto genders = domain_of(catalog, "DimPatient", "gender");
  const auto laws = domain_of(catalog, "DimPatient", "hio_law");
  const auto proc_names = domain_of(catalog, "DimProcedure", "procedure_name");
  const auto proc_types = domain_of(catalog, "DimProcedure", "procedure_type");
  const auto kinds = domain_of(catalog, "DimTreatment", "treatment_kind");
  const auto diseases = domain_of(catalog, "DimTreatment", "disease");

  Rng rng(opt.seed);
  ordered_json typos = ordered_json::array();
  std::size_t typo_count = 0;

  // Writes `clean` or, with probability typo_rate, a recoverable typo of it.
  auto emit = [&](const std::string& file, int line, const std::string& column,
                  const std::string& clean, const std::vector<std::string>& domain) {
    if (clean.size() < kMinTypoLength || rng.unit() >= opt.typo_rate) return clean;
    auto t = make_typo(rng, clean, domain);
    typos.push_back({{"file", file}, {"line", line}, {"column", column},
                     {"original", clean}, {"typo", t}});
    ++typo_count;
    return t;
  };

  // ---------------------------------------------------------------- patients
  struct Patient {
    std::string id, gender, law;
  };
  std::vector<Patient> patients;
  const std::size_t bad_ages = std::max<std::size_t>(1, opt.patients / 100);
  std::vector<bool> bad_slot(opt.patients + bad_ages, false);
  for (std::size_t k = 0; k < bad_ages;) {
    auto pos = rng.below(bad_slot.size());
    if (!bad_slot[pos]) {
      bad_slot[pos] = true;
      ++k;
    }
  }
  std::string patients_csv =
      csv::join({"رقم المريض", "اسم المريض", "النوع", "السن", "العنوان", "التليفون",
                 "قانون التأمين"}) + "\n";
  std::size_t next_good = 1, next_bad = 1;
  for (std::size_t slot = 0; slot < bad_slot.size(); ++slot) {
    const int line = static_cast<int>(slot) + 2;
    char id[32];
    std::string age;
    if (bad_slot[slot]) {
      std::snprintf(id, sizeof id, "P-B%04zu", next_bad++);
      age = rng.pick(kAgeWords);
    } else {
      std::snprintf(id, sizeof id, "P-%05zu", next_good++);
      age = std::to_string(rng.between(1, 90));
    }
    // Both genders appear even in tiny datasets.
    const std::string gender = !bad_slot[slot] && patients.size() < genders.size()
                                   ? genders[patients.size()]
                                   : rng.pick(genders);
    const std::string law = rng.pick(laws);
    const std::string name = rng.pick(kFirstNames) + " " + rng.pick(kFamilyNames);
    const std::string address = std::to_string(rng.between(1, 120)) + " " +
                                rng.pick(kStreets) + ", " + rng.pick(kTowns);
    char phone[16];
    std::snprintf(phone, sizeof phone, "01%d%08lld", static_cast<int>(rng.below(3)),
                  static_cast<long long>(rng.below(100000000)));
    const auto g = emit("patients.csv", line, "gender", gender, genders);
    const auto l = emit("patients.csv", line, "hio_law", law, laws);
    patients_csv += csv::join({id, name, g, age, address, phone, l}) + "\n";
    if (!bad_slot[slot]) patients.push_back({id, gender, law});
  }

  // ---------------------------------------------------------------- procedures
  std::string procedures_csv = "procedure_id,procedure_name,procedure_type\n";
  std::vector<std::string> procedure_ids;
  for (std::size_t i = 0; i < kProcedures.size(); ++i) {
    const int line = static_cast<int>(i) + 2;
    char id[16];
    std::snprintf(id, sizeof id, "PR%02zu", i + 1);
    procedure_ids.push_back(id);
    procedures_csv +=
        csv::join({id, emit("procedures.csv", line, "procedure_name", kProcedures[i].first, proc_names),
                   emit("procedures.csv", line, "procedure_type", kProcedures[i].second, proc_types)}) +
        "\n";
  }

  // ---------------------------------------------------------------- treatments
  std::string treatments_csv = "treatment_id,treatment_name,treatment_kind,disease\n";
  std::vector<std::string> treatment_ids;
  for (const auto& disease : diseases) {
    for (const auto& kind : kinds) {
      const int line = static_cast<int>(treatment_ids.size()) + 2;
      char id[16];
      std::snprintf(id, sizeof id, "T%02zu", treatment_ids.size() + 1);
      treatment_ids.push_back(id);
      treatments_csv += csv::join({id, kind + " for " + disease,
                                   emit("treatments.csv", line, "treatment_kind", kind, kinds),
                                   emit("treatments.csv", line, "disease", disease, diseases)}) +
                        "\n";
    }
  }

  // ---------------------------------------------------------------- facts
  const Date first = Date::from_ymd(2009, 1, 1);
  const Date last = Date::from_ymd(2012, 12, 31);
  const std::size_t unknown_rows = std::max<std::size_t>(1, opt.facts / 250);
  const std::size_t ragged_rows = std::max<std::size_t>(1, opt.facts / 1000);
  std::vector<int> slot_kind(opt.facts + unknown_rows + ragged_rows, 0);
  for (std::size_t k = 0; k < unknown_rows + ragged_rows;) {
    auto pos = rng.below(slot_kind.size());
    if (slot_kind[pos] == 0) {
      slot_kind[pos] = k < unknown_rows ? 1 : 2;
      ++k;
    }
  }

  Totals total;
  std::map<std::string, Totals> per_gender, per_law;
  std::map<std::string, std::map<int, Totals>> per_year;
  const std::array<const char*, 3> date_roles = {"DiagnoseDate", "ProcedureDate",
                                                 "TreatmentDate"};
  std::string facts_csv =
      "patient_id,procedure_id,treatment_id,diagnose_date,procedure_date,treatment_date,"
      "cost,quantity\n";
  std::size_t next_unknown = 1;
  for (int kind : slot_kind) {
    const auto& patient = patients[rng.below(patients.size())];
    const auto& procedure = rng.pick(procedure_ids);
    const auto& treatment = rng.pick(treatment_ids);
    const Date diagnose = Date::from_days(
        static_cast<std::int32_t>(rng.between(first.days(), last.days())));
    const Date proc_date = Date::from_days(
        std::min(last.days(), static_cast<std::int32_t>(diagnose.days() + rng.between(0, 60))));
    const Date treat_date = Date::from_days(
        std::min(last.days(), static_cast<std::int32_t>(proc_date.days() + rng.between(0, 90))));
    const std::int64_t cents = rng.between(5000, 500000);
    const std::int64_t qty = rng.between(1, 10);
    std::vector<std::string> fields = {patient.id, procedure, treatment,
                                       diagnose.to_string(), proc_date.to_string(),
                                       treat_date.to_string()};
    if (kind == 1) {
      char id[32];
      std::snprintf(id, sizeof id, "P-X%04zu", next_unknown++);
      fields[0] = id;
      fields.push_back("0.00");
      fields.push_back("0");
    } else if (kind == 0) {
      fields.push_back(money(cents));
      fields.push_back(std::to_string(qty));
      total.add(cents, qty);
      per_gender[patient.gender].add(cents, qty);
      per_law[patient.law].add(cents, qty);
      const std::array<Date, 3> dates = {diagnose, proc_date, treat_date};
      for (std::size_t r = 0; r < dates.size(); ++r) {
        per_year[date_roles[r]][dates[r].year()].add(cents, qty);
      }
    }
    facts_csv += csv::join(fields) + "\n";
  }

  // ---------------------------------------------------------------- manifest
  ordered_json m;
  m["generator"] = {{"seed", opt.seed},
                    {"patients", opt.patients},
                    {"facts", opt.facts},
                    {"typo_rate", opt.typo_rate},
                    {"typo_min_length", kMinTypoLength},
                    {"fuzzy_threshold", kThreshold}};
  m["files"] = {{"patients.csv", {{"rows", patients.size() + bad_ages}}},
                {"procedures.csv", {{"rows", procedure_ids.size()}}},
                {"treatments.csv", {{"rows", treatment_ids.size()}}},
                {"facts.csv", {{"rows", slot_kind.size()}}}};
  m["injected_errors"] = {{"patients_bad_age", bad_ages},
                          {"facts_unknown_patient", unknown_rows},
                          {"facts_ragged", ragged_rows}};
  m["clean_values"] = {{"gender", genders},     {"hio_law", laws},
                       {"procedure_name", proc_names}, {"procedure_type", proc_types},
                       {"treatment_kind", kinds}, {"disease", diseases}};
  m["typo_count"] = typo_count;
  m["typos"] = typos;

  ordered_json expected;
  expected["dimension_rows"] = {{"DimPatient", patients.size()},
                                {"DimProcedure", procedure_ids.size()},
                                {"DimTreatment", treatment_ids.size()},
                                {"DimDate", last.days() - first.days() + 1}};
  expected["fact_rows"] = opt.facts;
  expected["calendar"] = {{"first", first.to_string()},
                          {"last", last.to_string()},
                          {"min_year", first.year()},
                          {"max_year", last.year()}};
  expected["total_cost"] = Decimal::from_raw(total.cost_raw).to_string();
  expected["total_quantity"] = total.quantity;
  ordered_json g = ordered_json::object();
  for (const auto& [k, v] : per_gender) g[k] = v.to_json();
  expected["per_gender"] = g;
  ordered_json l = ordered_json::object();
  for (const auto& [k, v] : per_law) l[k] = v.to_json();
  expected["per_hio_law"] = l;
  ordered_json y = ordered_json::object();
  for (const auto& role : date_roles) {
    ordered_json years = ordered_json::object();
    for (const auto& [year, v] : per_year[role]) years[std::to_string(year)] = v.to_json();
    y[role] = years;
  }
  expected["per_year"] = y;
  m["expected"] = expected;

  SyntheticDataset ds;
  ds.files = {{"patients.csv", std::move(patients_csv)},
              {"procedures.csv", std::move(procedures_csv)},
              {"treatments.csv", std::move(treatments_csv)},
              {"facts.csv", std::move(facts_csv)},
              {"manifest.json", m.dump(2) + "\n"}};
  return ds;
}

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
  for (const auto& f : dataset.files) csv::write_file(dir / f.name, f.content);
}

PipelineConfig reference_pipeline() {
  PipelineConfig cfg;
  cfg.batch_id = "batch-1";
  cfg.sources = {
      {"patients", "patients.csv"},
      {"procedures", "procedures.csv"},
      {"treatments", "treatments.csv"},
      {"facts", "facts.csv"},
  };

  LoadDef patients;
  patients.target = "DimPatient";
  patients.source = "patients";
  patients.transforms = {
      RenameColumns{{{"رقم المريض", "patient_id"},
                     {"اسم المريض", "name"},
                     {"النوع", "gender"},
                     {"السن", "age"},
                     {"العنوان", "address"},
                     {"التليفون", "phone"},
                     {"قانون التأمين", "hio_law"}}},
      ConvertTypes{{{"age", ValueKind::Integer}}, OnError::Quarantine},
      DeriveColumn{"age_band", DeriveRule::AgeBand, "age"},
      FuzzyLookup{"gender", "DimPatient", "gender"},
      FuzzyLookup{"hio_law", "DimPatient", "hio_law"},
  };

  LoadDef procedures;
  procedures.target = "DimProcedure";
  procedures.source = "procedures";
  procedures.transforms = {
      FuzzyLookup{"procedure_name", "DimProcedure", "procedure_name"},
      FuzzyLookup{"procedure_type", "DimProcedure", "procedure_type"},
  };

  LoadDef treatments;
  treatments.target = "DimTreatment";
  treatments.source = "treatments";
  treatments.transforms = {
      FuzzyLookup{"treatment_kind", "DimTreatment", "treatment_kind"},
      FuzzyLookup{"disease", "DimTreatment", "disease"},
  };

  LoadDef facts;
  facts.target = "FactMedical";
  facts.source = "facts";
  facts.transforms = {
      RenameColumns{{{"patient_id", "PaID"},
                     {"procedure_id", "ProID"},
                     {"treatment_id", "TrID"},
                     {"diagnose_date", "DiagnoseDate"},
                     {"procedure_date", "ProcedureDate"},
                     {"treatment_date", "TreatmentDate"},
                     {"cost", "Cost"},
                     {"quantity", "Quantity"}}},
      ConvertTypes{{{"Cost", ValueKind::Decimal},
                    {"Quantity", ValueKind::Integer},
                    {"DiagnoseDate", ValueKind::Date},
                    {"ProcedureDate", ValueKind::Date},
                    {"TreatmentDate", ValueKind::Date}},
                   OnError::Quarantine},
  };

  cfg.loads = {patients, procedures, treatments, facts};
  return cfg;
}

}  // namespace starcube::etl
