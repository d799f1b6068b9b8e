#pragma once

#include "text2flow/error.hpp"
#include "text2flow/text.hpp"
#include "text2flow/graph.hpp"
#include "text2flow/flow_dsl.hpp"
#include "text2flow/simulator.hpp"
#include "text2flow/bleu.hpp"
#include "text2flow/prioritizer.hpp"
#include "text2flow/prompts.hpp"
#include "text2flow/agents.hpp"
#include "text2flow/mock_backend.hpp"
#include "text2flow/http_backend.hpp"
#include "text2flow/orchestrator.hpp"
#include "text2flow/evaluator.hpp"
#include "text2flow/config.hpp"
