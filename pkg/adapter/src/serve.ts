/**
 * Chat-completion server exposing a trained adapter.
 *
 * Speaks the protocol the verichain inference client expects: POST
 * /v1/chat/completions with {model, messages, temperature, max_tokens}
 * answering {choices: [{message, finish_reason}], usage}, plus a
 * health route reporting the served model. Shuts down cleanly on
 * SIGINT/SIGTERM.
 */

import * as http from 'node:http';

import express, { Request, Response } from 'express';

import { PortInUseError } from './errors.js';
import { TinyLm } from './model.js';

export interface ServeOptions {
  maxConcurrent?: number;
  modelName?: string;
}

interface ChatMessage {
  role: string;
  content: string;
}

export function buildApp(model: TinyLm, options: ServeOptions = {}) {
  const app = express();
  app.use(express.json({ limit: '2mb' }));
  const servedName = options.modelName ?? `${model.baseModel}+adapter`;
  const maxConcurrent = options.maxConcurrent ?? 4;
  let inFlight = 0;

  app.get('/health', (_req: Request, res: Response) => {
    res.json({ status: 'ok', model: servedName });
  });

  app.post('/v1/chat/completions', (req: Request, res: Response) => {
    const body = req.body as Record<string, unknown>;
    const messages = body?.messages as ChatMessage[] | undefined;
    if (!Array.isArray(messages) || messages.length === 0) {
      res.status(400).json({ error: { message: "request needs a non-empty 'messages' array" } });
      return;
    }
    const last = messages[messages.length - 1];
    if (typeof last?.content !== 'string') {
      res.status(400).json({ error: { message: 'last message has no string content' } });
      return;
    }
    if (inFlight >= maxConcurrent) {
      res.status(429).json({ error: { message: 'too many concurrent requests' } });
      return;
    }
    const temperature = typeof body.temperature === 'number' ? body.temperature : 0.01;
    const maxTokens = typeof body.max_tokens === 'number' ? body.max_tokens : 256;
    if (maxTokens < 1 || maxTokens > 8192) {
      res.status(400).json({ error: { message: 'max_tokens outside 1..8192' } });
      return;
    }

    inFlight += 1;
    try {
      const prompt = messages
        .map((message) => message.content)
        .join('\n');
      const generation = model.generate(prompt, maxTokens, temperature);
      res.json({
        id: `cmpl-${Date.now().toString(36)}`,
        object: 'chat.completion',
        model: servedName,
        choices: [
          {
            index: 0,
            message: { role: 'assistant', content: generation.text },
            finish_reason: generation.finishReason,
          },
        ],
        usage: {
          prompt_tokens: prompt.length,
          completion_tokens: generation.text.length,
          total_tokens: prompt.length + generation.text.length,
        },
      });
    } finally {
      inFlight -= 1;
    }
  });

  return app;
}

export function serve(
  model: TinyLm,
  port: number,
  options: ServeOptions = {}
): Promise<http.Server> {
  const app = buildApp(model, options);
  return new Promise((resolve, reject) => {
    const server = app.listen(port);
    server.once('listening', () => {
      const close = () => {
        server.close(() => process.exit(0));
      };
      process.once('SIGINT', close);
      process.once('SIGTERM', close);
      resolve(server);
    });
    server.once('error', (err: NodeJS.ErrnoException) => {
      if (err.code === 'EADDRINUSE') reject(new PortInUseError(port));
      else reject(err);
    });
  });
}
