/* Deliberately writes past its declared buffers. */

void overrun_output(double *out, const double *in)
{
    out[0] = in[0];
    out[1] = in[0];
}

void underrun_output(double *out, const double *in)
{
    out[0] = in[0];
    out[-1] = in[0];
}

void scribble_input(double *out, double *in)
{
    out[0] = in[0];
    in[1] = 0.0;
}

void well_behaved(double *out, const double *in)
{
    out[0] = 2.0 * in[0];
}
