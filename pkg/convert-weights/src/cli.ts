#!/usr/bin/env node
/**
 * convert-weights --checkpoint <safetensors> --map <json> --out <eswt>
 *
 * Converts an externally published checkpoint into an ESWT weight file
 * through an explicit name map. Exit codes: 0 success, 1 conversion error
 * (missing key, dim mismatch, malformed file), 2 bad usage.
 */

import { convert, ConvertError } from './convert.js';
import { EswtError } from './eswt.js';
import { SafetensorsError } from './safetensors.js';

const USAGE = 'usage: convert-weights --checkpoint <file> --map <file> --out <file>';

interface CliArgs {
  checkpoint: string;
  map: string;
  out: string;
}

function parseArgs(argv: string[]): CliArgs | null {
  const opts: Partial<CliArgs> = {};
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case '--checkpoint':
        opts.checkpoint = argv[++i];
        break;
      case '--map':
        opts.map = argv[++i];
        break;
      case '--out':
        opts.out = argv[++i];
        break;
      case '--help':
      case '-h':
        return null;
      default:
        process.stderr.write(`unknown argument: ${argv[i]}\n`);
        return null;
    }
  }
  if (!opts.checkpoint || !opts.map || !opts.out) {
    return null;
  }
  return opts as CliArgs;
}

export function run(argv: string[]): number {
  const args = parseArgs(argv);
  if (args === null) {
    process.stderr.write(USAGE + '\n');
    return 2;
  }
  try {
    const summary = convert(args.checkpoint, args.map, args.out);
    process.stdout.write(JSON.stringify(summary, null, 2) + '\n');
    return 0;
  } catch (err) {
    if (err instanceof ConvertError || err instanceof EswtError || err instanceof SafetensorsError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    if (err instanceof Error && 'code' in err) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop()!);

if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
