// Optional runtime dependency; resolved dynamically when installed.
declare module '@xenova/transformers';
