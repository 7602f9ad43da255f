#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "triage/cc/cc_classifier.hpp"
#include "triage/cms/catalog.hpp"
#include "triage/forest/forest.hpp"
#include "triage/neural/assessment.hpp"
#include "triage/qseq/kb.hpp"

namespace triage::service {

inline constexpr int kBundleFormatVersion = 1;

// Everything a serving process needs. Immutable once loaded.
struct ModelBundle {
  cms::ConceptCatalog catalog;
  qseq::KnowledgeBase kb;
  std::map<CohortKey, forest::CohortForest> forests;
  // Cohorts whose forest file is listed in the manifest but missing on disk.
  std::set<CohortKey> rules_only;
  std::optional<cc::CcModel> cc_model;
  std::optional<neural::AssessmentModel> assessment;

  // Null for cohorts without a forest.
  const forest::CohortForest* forest_for(const CohortKey& key) const;
};

// Writes catalog.json, kb.json, forests/<stem>.cbor, cc_model.cbor,
// assessment.cbor and manifest.json (format, version, sha256 per file).
void persist_models(const ModelBundle& bundle, const std::filesystem::path& dir);

// Verifies every listed file against its digest before parsing anything.
// A missing forest file marks its cohort rules-only with a warning; any other
// missing file or digest mismatch throws IntegrityError; a different bundle
// version throws IncompatibleVersionError.
ModelBundle load_models(const std::filesystem::path& dir);

}  // namespace triage::service
