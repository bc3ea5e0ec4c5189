#pragma once

#include "factsteer/bench/builder.hpp"
#include "factsteer/clients/chat_client.hpp"
#include "factsteer/config/run_config.hpp"
#include "factsteer/contrast/corpus.hpp"
#include "factsteer/eval/ablation.hpp"
#include "factsteer/eval/entanglement.hpp"
#include "factsteer/eval/runner.hpp"
#include "factsteer/locator/shift_locator.hpp"
#include "factsteer/model/toy_transformer.hpp"
#include "factsteer/probe/prober.hpp"
#include "factsteer/retrieval/vector_index.hpp"
#include "factsteer/sim/simulation.hpp"
#include "factsteer/steer/steering.hpp"
