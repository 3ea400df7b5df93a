#pragma once

#include "synthrl/answer_codec.hpp"
#include "synthrl/config.hpp"
#include "synthrl/curriculum.hpp"
#include "synthrl/export.hpp"
#include "synthrl/gateway.hpp"
#include "synthrl/http_backend.hpp"
#include "synthrl/pipeline.hpp"
#include "synthrl/prompts.hpp"
#include "synthrl/record_parser.hpp"
#include "synthrl/report.hpp"
#include "synthrl/retrieval.hpp"
#include "synthrl/sample.hpp"
#include "synthrl/scripted_backend.hpp"
#include "synthrl/selection.hpp"
#include "synthrl/synthesis.hpp"
#include "synthrl/task_spec.hpp"
#include "synthrl/text.hpp"
