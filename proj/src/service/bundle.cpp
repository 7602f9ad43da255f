#include "triage/service/bundle.hpp"

#include "triage/error.hpp"
#include "triage/util/log.hpp"

namespace triage::service {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "triage_bundle";

util::Json cohort_to_json(const CohortKey& k) {
  return {{"chief_complaint", k.chief_complaint},
          {"age_bin", k.age_bin},
          {"sex", to_string(k.sex)}};
}

CohortKey cohort_from_json(const util::Json& j) {
  CohortKey k;
  k.chief_complaint = util::get_field<std::string>(j, "chief_complaint", "manifest cohort");
  k.age_bin = util::get_field<int>(j, "age_bin", "manifest cohort");
  k.sex = parse_sex(util::get_field<std::string>(j, "sex", "manifest cohort"));
  return k;
}

}  // namespace

const forest::CohortForest* ModelBundle::forest_for(const CohortKey& key) const {
  auto it = forests.find(key);
  return it == forests.end() ? nullptr : &it->second;
}

void persist_models(const ModelBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir / "forests");
  util::Json files = util::Json::object();
  auto record = [&](const std::string& rel) {
    files[rel] = util::sha256_hex(util::read_text_file(dir / rel));
  };
  bundle.catalog.save(dir / "catalog.json");
  record("catalog.json");
  util::write_json_file(dir / "kb.json", bundle.kb.to_json());
  record("kb.json");
  util::Json forests = util::Json::array();
  for (const auto& [key, f] : bundle.forests) {
    const std::string rel = "forests/" + key.file_stem() + ".cbor";
    f.save(dir / rel);
    record(rel);
    forests.push_back({{"cohort", cohort_to_json(key)}, {"file", rel}});
  }
  util::Json doc = {{"format", kFormat}, {"version", kBundleFormatVersion}};
  if (bundle.cc_model) {
    bundle.cc_model->save(dir / "cc_model.cbor");
    record("cc_model.cbor");
    doc["cc_model"] = "cc_model.cbor";
  }
  if (bundle.assessment) {
    util::write_cbor_file(dir / "assessment.cbor", bundle.assessment->to_json());
    record("assessment.cbor");
    doc["assessment"] = "assessment.cbor";
  }
  doc["forests"] = forests;
  doc["files"] = files;
  util::write_json_file(dir / "manifest.json", doc);
}

ModelBundle load_models(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw IntegrityError(manifest_path.string() + ": missing bundle manifest");
  }
  const util::Json manifest = util::read_json_file(manifest_path);
  if (manifest.value("format", std::string()) != kFormat) {
    throw IntegrityError(manifest_path.string() + ": not a model bundle manifest");
  }
  const int version = manifest.value("version", -1);
  if (version != kBundleFormatVersion) {
    throw IncompatibleVersionError("model bundle version " + std::to_string(version) +
                                   ", expected " + std::to_string(kBundleFormatVersion));
  }
  const auto files = util::get_field<std::map<std::string, std::string>>(manifest, "files",
                                                                          "manifest");
  std::set<std::string> forest_files;
  for (const auto& entry : manifest.value("forests", util::Json::array())) {
    forest_files.insert(util::get_field<std::string>(entry, "file", "manifest forest"));
  }
  // Verify everything up front so a bad file never leaves a partial bundle.
  std::set<std::string> missing;
  for (const auto& [rel, digest] : files) {
    const fs::path p = dir / rel;
    if (!fs::exists(p)) {
      if (forest_files.count(rel)) {
        missing.insert(rel);
        continue;
      }
      throw IntegrityError(p.string() + ": listed in the manifest but missing");
    }
    if (util::sha256_hex(util::read_text_file(p)) != digest) {
      throw IntegrityError(p.string() + ": checksum mismatch");
    }
  }
  auto checked = [&](const std::string& rel) {
    if (!files.count(rel)) throw IntegrityError(rel + ": not covered by the manifest");
    return dir / rel;
  };

  ModelBundle b;
  try {
    b.catalog = cms::ConceptCatalog::load(checked("catalog.json"));
    b.kb = qseq::KnowledgeBase::load(checked("kb.json"), b.catalog);
    for (const auto& entry : manifest.value("forests", util::Json::array())) {
      const CohortKey key = cohort_from_json(util::get_field<util::Json>(entry, "cohort", "manifest"));
      const std::string rel = entry.at("file").get<std::string>();
      if (missing.count(rel)) {
        util::log_warn("forest for cohort " + key.file_stem() +
                       " is missing; the cohort runs rules-only");
        b.rules_only.insert(key);
        continue;
      }
      b.forests.emplace(key, forest::CohortForest::load(checked(rel)));
    }
    if (manifest.contains("cc_model")) {
      b.cc_model = cc::CcModel::load(checked(manifest.at("cc_model").get<std::string>()));
    }
    if (manifest.contains("assessment")) {
      b.assessment = neural::AssessmentModel::from_json(
          util::read_cbor_file(checked(manifest.at("assessment").get<std::string>())));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(dir.string() + ": malformed bundle file: " + e.what());
  }
  return b;
}

}  // namespace triage::service
