// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "feedforge/batch.hpp"
#include "feedforge/batcher.hpp"
#include "feedforge/blobstore.hpp"
#include "feedforge/clock.hpp"
#include "feedforge/dataset.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/features.hpp"
#include "feedforge/feeds.hpp"
#include "feedforge/flatten.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/ingest.hpp"
#include "feedforge/labeling.hpp"
#include "feedforge/pipeline.hpp"
#include "feedforge/queue.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/scorer.hpp"
#include "feedforge/sql/ast.hpp"
#include "feedforge/sql/executor.hpp"
#include "feedforge/sql/parser.hpp"
#include "feedforge/table.hpp"
#include "feedforge/value.hpp"
#include "feedforge/wal.hpp"
#include "feedforge/warehouse.hpp"
