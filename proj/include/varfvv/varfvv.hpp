#pragma once

#include "varfvv/autodiff.hpp"
#include "varfvv/bit_allocator.hpp"
#include "varfvv/config.hpp"
#include "varfvv/edge_session.hpp"
#include "varfvv/error.hpp"
#include "varfvv/experiment.hpp"
#include "varfvv/popularity.hpp"
#include "varfvv/report.hpp"
#include "varfvv/stgnn.hpp"
#include "varfvv/stream_model.hpp"
#include "varfvv/sync_buffer.hpp"
#include "varfvv/traces.hpp"
#include "varfvv/view_graph.hpp"
