#pragma once

#include <map>
#include <string>

#include "triage/cms/catalog.hpp"
#include "triage/forest/forest.hpp"

namespace triage::qseq {

// Question (or concept) id -> number of trees voting for it.
using Votes = std::map<std::string, int>;

// Traverses every tree along answered features. A tree that stops at a node
// splitting on an unanswered concept votes for that concept; a tree that
// reaches a leaf votes for nothing.
Votes forest_vote(const forest::CohortForest& forest,
                  const forest::EncodedRow& row);

// As above, with each voted concept replaced by the question that collects
// it (select questions own their option concepts).
Votes forest_vote(const forest::CohortForest& forest,
                  const forest::EncodedRow& row,
                  const cms::ConceptCatalog& catalog);

}  // namespace triage::qseq
