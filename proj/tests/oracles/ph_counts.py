# Page-Hinkley Monte-Carlo counts, written independently of the C++ code.
# Prints (detected, early, false_alarms) for the literal and scaled parameters.
import math
M=(1<<64)-1
def sm(x):
    x=(x+0x9E3779B97F4A7C15)&M
    x=((x^(x>>30))*0xBF58476D1CE4E5B9)&M
    x=((x^(x>>27))*0x94D049BB133111EB)&M
    return x^(x>>31)
class R:
    def __init__(s,seed): s.s=sm(seed) or 0x9E3779B97F4A7C15
    def next(s):
        x=s.s; x^=x>>12; x^=(x<<25)&M; x^=x>>27; s.s=x; return (x*0x2545F4914F6CDD1D)&M
    def u(s): return (s.next()>>11)*2.0**-53
    def u1(s): return ((s.next()>>11)+1)*2.0**-53
    def normal(s):
        a=s.u1(); b=s.u(); return math.sqrt(-2*math.log(a))*math.cos(2*math.pi*b)
def det(delta,lam):
    st=dict(n=0,mean=0.0,m=0.0,mn=0.0,at=0)
    def push(e):
        st['n']+=1; st['mean']+=(e-st['mean'])/st['n']; st['m']+=e-st['mean']-delta
        st['mn']=min(st['mn'],st['m'])
        if st['at']==0 and st['m']-st['mn']>lam: st['at']=st['n']
        return st['at']
    return push
def trials(delta,lam):
    d=e=f=0
    for t in range(100):
        r=R(1000+t); p=det(delta,lam); a=0; i=1
        while i<=1050 and a==0:
            a=p(abs(r.normal()+(5.0 if i>1000 else 0.0))); i+=1
        if a and a<=1000: e+=1
        if a>1000: d+=1
        r=R(5000+t); p=det(delta,lam); a=0; i=1
        while i<=10000 and a==0:
            a=p(abs(r.normal())); i+=1
        if a: f+=1
    return d,e,f
print("literal",trials(0.05,2.5)); print("scaled",trials(0.25,20.0))
