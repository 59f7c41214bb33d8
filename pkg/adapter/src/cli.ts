/** Command-line entry: one role per process. */

import { parseArgs } from "node:util";

import { createAdapter, type Mode, type Role } from "./server.js";

function main(): void {
  const { values } = parseArgs({
    options: {
      role: { type: "string" },
      mode: { type: "string", default: "real" },
      port: { type: "string", default: "8000" },
      "model-name": { type: "string", default: "retrieval-transducer" },
      device: { type: "string", default: "cpu" },
      "max-new-tokens": { type: "string", default: "48" },
      "spool-dir": { type: "string" },
      help: { type: "boolean", default: false },
    },
  });

  if (values.help || !values.role) {
    console.log(
      "usage: divq-adapter --role forward|backward|embedder [--mode real|echo]\n" +
        "       [--port N] [--model-name NAME] [--device DEV]\n" +
        "       [--max-new-tokens N] [--spool-dir DIR]"
    );
    process.exit(values.help ? 0 : 2);
  }
  const role = values.role as Role;
  if (!["forward", "backward", "embedder"].includes(role)) {
    console.error(`unknown role: ${role}`);
    process.exit(2);
  }
  const mode = values.mode as Mode;
  if (!["real", "echo"].includes(mode)) {
    console.error(`unknown mode: ${mode}`);
    process.exit(2);
  }

  const handle = createAdapter({
    role,
    mode,
    modelName: values["model-name"],
    device: values.device,
    maxNewTokens: Number(values["max-new-tokens"]),
    spoolDir: values["spool-dir"],
  });
  const port = Number(values.port);
  handle.app.listen(port, () => {
    console.log(`divq-adapter role=${role} mode=${mode} listening on :${port}`);
  });
}

main();
