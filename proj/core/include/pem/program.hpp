#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "pem/machine.hpp"

namespace pem {

// A processor program is called once per parallel step. It may do free
// in-cache work, then returns its next request, or nullopt when it is done.
// Each call observes the outcome of the request it returned previously.
using ProcProgram = std::function<std::optional<IoRequest>(MachineState&, ProcId)>;

// Runs the programs in lock step until all are done; returns the number of
// parallel I/Os spent. In normalized mode a step mixing reads and writes is
// split into a read step followed by a write step.
std::size_t run_lockstep(MachineState& state, std::vector<ProcProgram>& programs);

// A logical sequence of atoms stored in shared memory: the concatenation of
// the listed blocks' contents.
struct Layout {
  std::vector<BlockIndex> blocks;
};

// The blocks holding the initial input, in input order.
Layout initial_layout(const MachineState& state);
std::vector<AtomId> layout_atoms(const MachineState& state, const Layout& layout);
std::size_t layout_size(const MachineState& state, const Layout& layout);
void release_layout(MachineState& state, const Layout& layout);

// Moves atoms of `input` into freshly acquired blocks so that output block k
// holds exactly `outputs[k]` in that order. Output blocks are split among
// processors by `proc_start` (P+1 offsets into `outputs`); empty means an even
// split. Each processor reads source blocks on demand, keeps only atoms it
// still has to write, and evicts the atoms needed furthest in the future when
// its cache runs short. The input blocks are left untouched.
Layout gather(MachineState& state, const Layout& input,
              const std::vector<std::vector<AtomId>>& outputs,
              std::vector<std::size_t> proc_start = {});

// Splits `count` items into P contiguous ranges of near equal size.
std::vector<std::size_t> even_split(std::size_t count, std::size_t procs);

}  // namespace pem
