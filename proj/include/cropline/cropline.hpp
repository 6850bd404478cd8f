// Copyright 2026 The Cropline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "cropline/drift_detector.hpp"
#include "cropline/error.hpp"
#include "cropline/image.hpp"
#include "cropline/image_verifier.hpp"
#include "cropline/knowledge_base.hpp"
#include "cropline/message_parser.hpp"
#include "cropline/pipeline.hpp"
#include "cropline/solution_ranker.hpp"
#include "cropline/strings.hpp"
#include "cropline/text_embeddings.hpp"
#include "cropline/transport.hpp"
#include "cropline/wmd.hpp"
